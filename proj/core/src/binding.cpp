#include "mathesis/binding.hpp"

namespace mathesis {

std::size_t Binding::ring_size() const {
  int mx = -1;
  for (const auto& [node, slot] : scalars) mx = std::max(mx, slot.ring_index);
  return static_cast<std::size_t>(mx + 1);
}

std::vector<double> Binding::ring_values(const std::set<int>& needed) const {
  std::vector<double> vals(ring_size(), 0.0);
  std::vector<bool> have(vals.size(), false);
  for (const auto& [node, slot] : scalars) {
    if (slot.ring_index >= 0 && slot.value) {
      vals[static_cast<std::size_t>(slot.ring_index)] = *slot.value;
      have[static_cast<std::size_t>(slot.ring_index)] = true;
    }
  }
  for (int idx : needed) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= vals.size() ||
        !have[static_cast<std::size_t>(idx)])
      throw BindingError("missing value for ring variable #" + std::to_string(idx));
  }
  return vals;
}

BindingLayout BindingLayout::of(const Binding& b) {
  BindingLayout layout;
  int off = 0;
  for (const auto& [node, m] : b.matrices) {
    if (!b.is_free(node)) continue;
    int count = static_cast<int>(m.rows() * m.cols());
    layout.entries.push_back({node, Kind::Matrix, off, count});
    off += count;
  }
  for (const auto& [node, p] : b.points) {
    if (!b.is_free(node)) continue;
    layout.entries.push_back({node, Kind::Point, off, 2});
    off += 2;
  }
  for (const auto& [node, s] : b.scalars) {
    if (!b.is_free(node)) continue;
    layout.entries.push_back({node, Kind::Scalar, off, 1});
    off += 1;
  }
  layout.total = off;
  return layout;
}

Eigen::VectorXd free_vector(const Binding& b, const BindingLayout& layout) {
  Eigen::VectorXd x(layout.total);
  for (const auto& e : layout.entries) {
    switch (e.kind) {
      case BindingLayout::Kind::Matrix: {
        const Mat& m = b.matrices.at(e.node);
        int k = e.offset;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          for (Eigen::Index j = 0; j < m.cols(); ++j) x(k++) = m(i, j);
        break;
      }
      case BindingLayout::Kind::Point: {
        const Point2& p = b.points.at(e.node);
        x(e.offset) = p.x;
        x(e.offset + 1) = p.y;
        break;
      }
      case BindingLayout::Kind::Scalar: {
        const ScalarSlot& s = b.scalars.at(e.node);
        if (!s.value) throw BindingError("free scalar slot without a value");
        x(e.offset) = *s.value;
        break;
      }
    }
  }
  return x;
}

void set_free_vector(Binding& b, const BindingLayout& layout, const Eigen::VectorXd& x) {
  if (x.size() != layout.total) throw DimensionError("set_free_vector: size mismatch");
  for (const auto& e : layout.entries) {
    switch (e.kind) {
      case BindingLayout::Kind::Matrix: {
        Mat& m = b.matrices.at(e.node);
        int k = e.offset;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = x(k++);
        break;
      }
      case BindingLayout::Kind::Point: {
        Point2& p = b.points.at(e.node);
        p.x = x(e.offset);
        p.y = x(e.offset + 1);
        break;
      }
      case BindingLayout::Kind::Scalar: {
        b.scalars.at(e.node).value = x(e.offset);
        break;
      }
    }
  }
}

}  // namespace mathesis
