#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mathesis/hypergraph.hpp"
#include "mathesis/rng.hpp"
#include "mathesis/rules.hpp"

namespace mathesis {

struct LoadedBrain;

/// Token kinds for the embedding table. Edges key on (fact status,
/// operator): a policy that cannot see truth status cannot represent
/// deduction heuristics.
enum class TokenKind : std::uint8_t {
  VarNode = 0,
  ConstNode = 1,
  CompoundNode = 2,
  FactEdge = 3,
  PlainEdge = 4,  // structurally present, not asserted
};
inline constexpr int kNumTokenKinds = 5;

struct TokenKey {
  TokenKind kind;
  std::string symbol;
  auto operator<=>(const TokenKey&) const = default;
};

struct BrainConfig {
  int d_model = 32;
  int layers = 2;
  int max_arity = 8;  // positional table size; also the pointer slot cap
};

/// All learnable parameters in one flat float64 vector with a stable layout:
/// token table (vocab rows then one OOV row per kind), learned slot
/// encodings, per-layer attention projections for the composition and
/// contextualization phases, operator head, operator embeddings, pointer
/// projections, value head. The sinusoidal positional table is fixed, not
/// learned.
class BrainParams {
 public:
  using MatView = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatView =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using VecView = Eigen::Map<Eigen::VectorXd>;
  using ConstVecView = Eigen::Map<const Eigen::VectorXd>;

  enum class Phase : int { Composition = 0, Contextualization = 1 };
  enum class Proj : int { Q = 0, K = 1, V = 2, O = 3 };

  BrainParams(BrainConfig cfg, std::vector<std::string> rule_names,
              std::vector<TokenKey> vocab);

  /// Deterministic scaled-uniform initialization.
  void randomize(RngStream& rng, double scale = 0.1);
  /// Zeroes the operator-selection head (uniform logits over present ops).
  void zero_operator_head();

  const BrainConfig& config() const { return cfg_; }
  int d() const { return cfg_.d_model; }
  int layers() const { return cfg_.layers; }
  const std::vector<std::string>& rule_names() const { return rule_names_; }
  const std::vector<TokenKey>& vocab() const { return vocab_; }

  std::size_t size() const { return flat_.size(); }
  std::vector<double>& flat() { return flat_; }
  const std::vector<double>& flat() const { return flat_; }

  /// Row index into the token table (OOV row of the kind when unseen).
  int token_row(const TokenKey& key) const;
  int token_rows() const { return static_cast<int>(vocab_.size()) + kNumTokenKinds; }

  ConstVecView token(int row) const;
  ConstVecView slot_encoding(int slot) const;
  ConstMatView attn(int layer, Phase phase, Proj proj) const;
  ConstMatView op_head_w() const;
  ConstVecView op_head_b() const;
  ConstVecView op_embedding(int rule) const;
  ConstMatView ptr_q() const;
  ConstMatView ptr_k() const;
  ConstVecView value_w() const;
  double value_b() const;

  /// Fixed sinusoidal positional encoding, position in [0, max_arity).
  const Eigen::VectorXd& positional(int pos) const;

  // Flat offsets (gradient accumulation and tests address sections directly).
  std::size_t off_token(int row) const;
  std::size_t off_slot(int slot) const;
  std::size_t off_attn(int layer, Phase phase, Proj proj) const;
  std::size_t off_op_w() const { return off_opw_; }
  std::size_t off_op_b() const { return off_opb_; }
  std::size_t off_op_emb(int rule) const;
  std::size_t off_ptr_q() const { return off_ptrq_; }
  std::size_t off_ptr_k() const { return off_ptrk_; }
  std::size_t off_value_w() const { return off_valw_; }
  std::size_t off_value_b() const { return off_valb_; }

  void save(const std::string& path, std::uint64_t episodes_done = 0,
            std::uint64_t master_seed = 0) const;
  static LoadedBrain load(const std::string& path);

  int max_slots() const { return max_slots_; }

 private:
  BrainConfig cfg_;
  std::vector<std::string> rule_names_;
  std::vector<TokenKey> vocab_;
  std::map<TokenKey, int> vocab_index_;
  std::vector<Eigen::VectorXd> pos_table_;
  int max_slots_ = 4;
  std::size_t off_slot_, off_attn_, off_opw_, off_opb_, off_opemb_, off_ptrq_, off_ptrk_,
      off_valw_, off_valb_;
  std::vector<double> flat_;
};

struct LoadedBrain {
  BrainParams params;
  std::uint64_t episodes_done = 0;
  std::uint64_t master_seed = 0;
};

/// Forward caches for the two-phase ordered message passing; retained for
/// the hand-rolled reverse pass.
struct EncodeCache {
  int n_nodes = 0;
  int n_entities = 0;

  struct Attn {
    std::vector<int> inputs;  // entity indices attended over
    std::vector<int> pos;     // positional index per input (-1: none)
    Eigen::VectorXd q;
    std::vector<Eigen::VectorXd> k, v;
    Eigen::VectorXd w;  // softmax weights
    Eigen::VectorXd z;  // weighted value sum
  };
  struct Ln {
    Eigen::VectorXd in;
    double mu = 0, istd = 0;
    Eigen::VectorXd out;
  };
  struct Layer {
    std::vector<Attn> attn_comp;   // per edge
    std::vector<Ln> ln_comp;       // per edge
    std::vector<Eigen::VectorXd> h_half;  // per entity (nodes: pass-through)
    std::vector<Attn> attn_ctx;    // per entity (inputs empty: residual only)
    std::vector<Ln> ln_ctx;        // per entity
    std::vector<Eigen::VectorXd> h_out;   // per entity
  };

  std::vector<Eigen::VectorXd> h0;
  std::vector<Layer> layers;
  Eigen::VectorXd pooled;

  const std::vector<Eigen::VectorXd>& final_embeddings() const {
    return layers.empty() ? h0 : layers.back().h_out;
  }
  int entity_index(EntityRef ref) const {
    return ref.is_node() ? static_cast<int>(ref.id) : n_nodes + static_cast<int>(ref.id);
  }
};

/// Two-phase ordered hypergraph attention encoder.
EncodeCache encode(const MathState& state, const BrainParams& params);

/// Policy over legal actions: softmax operator head over present rules,
/// autoregressive pointer attention per operand slot with type masking,
/// renormalized over the legal set.
struct ActionDistribution {
  std::vector<double> action_probs;                // aligned with `legal`
  std::map<std::string, double> op_probs;          // present rules only
  std::vector<std::vector<double>> slot_probs;     // per action, per slot
};
ActionDistribution policy(const MathState& state, const BrainParams& params,
                          const RuleLibrary& lib, const std::vector<Action>& legal);

/// Value head: sigmoid readout over mean-pooled entity embeddings.
double value(const MathState& state, const BrainParams& params);

/// Exact gradient of log pi(action | state) over the flat parameter vector.
/// Also reports log pi itself.
Eigen::VectorXd grad_log_policy(const MathState& state, const BrainParams& params,
                                const RuleLibrary& lib, const std::vector<Action>& legal,
                                std::size_t action_index, double* log_prob = nullptr);

/// Exact gradient of (value(state) - target)^2; reports the value.
Eigen::VectorXd grad_value_loss(const MathState& state, const BrainParams& params,
                                double target, double* value_out = nullptr);

/// Token keys of every entity in a state (vocabulary harvesting).
std::vector<TokenKey> state_token_keys(const MathState& state);

}  // namespace mathesis
