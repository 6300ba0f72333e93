#pragma once

#include <Eigen/Core>

#include <map>
#include <optional>
#include <set>

#include "mathesis/geometry_engine.hpp"
#include "mathesis/hypergraph.hpp"
#include "mathesis/matrix_engine.hpp"

namespace mathesis {

/// A scalar node's numeric realization: an index into the polynomial ring
/// (for symbols treated as ring variables), an optional concrete value, or
/// both. Bound constants carry only a value and lift as numbers.
struct ScalarSlot {
  int ring_index = -1;
  std::optional<double> value;
};

/// A point on the parameter manifold: concrete matrices, planar points and
/// scalar values attached to graph nodes. Slots are frozen by default; free
/// slots participate in the flattened optimization vector.
struct Binding {
  int dim = 4;  // shared matrix dimension d

  std::map<NodeId, Mat> matrices;
  std::map<NodeId, Point2> points;
  std::map<NodeId, ScalarSlot> scalars;
  std::set<NodeId> free_slots;

  bool is_free(NodeId id) const { return free_slots.count(id) > 0; }

  /// Number of ring variables (max ring index + 1).
  std::size_t ring_size() const;

  /// Values of every ring variable; throws BindingError when a ring variable
  /// listed in `needed` has no value.
  std::vector<double> ring_values(const std::set<int>& needed) const;
};

/// Stable flat ordering of the free slots: matrices (row-major), then
/// points (x, y), then scalars, each ascending by node id.
struct BindingLayout {
  enum class Kind : std::uint8_t { Matrix, Point, Scalar };
  struct Entry {
    NodeId node;
    Kind kind;
    int offset;
    int count;
  };
  std::vector<Entry> entries;
  int total = 0;

  static BindingLayout of(const Binding& b);
};

Eigen::VectorXd free_vector(const Binding& b, const BindingLayout& layout);
void set_free_vector(Binding& b, const BindingLayout& layout, const Eigen::VectorXd& x);

}  // namespace mathesis
