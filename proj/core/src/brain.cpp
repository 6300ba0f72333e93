#include "mathesis/brain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mathesis/rng.hpp"

namespace mathesis {

namespace {
constexpr double kLnEps = 1e-5;
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'M', 'T', 'H', 'B'};

TokenKey token_key_of(const MathState& state, EntityRef ref) {
  if (ref.is_node()) {
    const Node& n = state.node(ref.id);
    switch (n.type) {
      case NodeType::Variable: return {TokenKind::VarNode, n.label};
      case NodeType::Constant: return {TokenKind::ConstNode, n.label};
      case NodeType::CompoundTerm: return {TokenKind::CompoundNode, n.label};
    }
  }
  const Hyperedge& e = state.edge(ref.id);
  return {state.is_fact(ref.id) ? TokenKind::FactEdge : TokenKind::PlainEdge, e.op};
}

}  // namespace

std::vector<TokenKey> state_token_keys(const MathState& state) {
  std::vector<TokenKey> keys;
  keys.reserve(state.entity_count());
  for (const Node& n : state.nodes()) keys.push_back(token_key_of(state, node_ref(n.id)));
  for (const Hyperedge& e : state.edges()) keys.push_back(token_key_of(state, edge_ref(e.id)));
  return keys;
}

BrainParams::BrainParams(BrainConfig cfg, std::vector<std::string> rule_names,
                         std::vector<TokenKey> vocab)
    : cfg_(cfg), rule_names_(std::move(rule_names)), vocab_(std::move(vocab)) {
  std::sort(vocab_.begin(), vocab_.end());
  vocab_.erase(std::unique(vocab_.begin(), vocab_.end()), vocab_.end());
  for (std::size_t i = 0; i < vocab_.size(); ++i) vocab_index_[vocab_[i]] = static_cast<int>(i);

  const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
  const std::size_t rows = vocab_.size() + kNumTokenKinds;
  const std::size_t n_rules = rule_names_.size();
  std::size_t off = rows * d;
  off_slot_ = off;
  off += static_cast<std::size_t>(max_slots_) * d;
  off_attn_ = off;
  off += static_cast<std::size_t>(cfg_.layers) * 2 * 4 * d * d;
  off_opw_ = off;
  off += n_rules * d;
  off_opb_ = off;
  off += n_rules;
  off_opemb_ = off;
  off += n_rules * d;
  off_ptrq_ = off;
  off += d * d;
  off_ptrk_ = off;
  off += d * d;
  off_valw_ = off;
  off += d;
  off_valb_ = off;
  off += 1;
  flat_.assign(off, 0.0);

  pos_table_.resize(static_cast<std::size_t>(cfg_.max_arity));
  for (int p = 0; p < cfg_.max_arity; ++p) {
    Eigen::VectorXd v(cfg_.d_model);
    for (int i = 0; i < cfg_.d_model; ++i) {
      double angle = p / std::pow(10000.0, (2.0 * (i / 2)) / cfg_.d_model);
      v(i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
    pos_table_[static_cast<std::size_t>(p)] = std::move(v);
  }
}

void BrainParams::randomize(RngStream& rng, double scale) {
  const double attn_scale = 0.5 / std::sqrt(static_cast<double>(cfg_.d_model));
  for (std::size_t i = 0; i < flat_.size(); ++i) {
    double s = (i >= off_attn_ && i < off_opw_) || i >= off_ptrq_ ? attn_scale : scale;
    flat_[i] = rng.uniform(-s, s);
  }
}

void BrainParams::zero_operator_head() {
  std::fill(flat_.begin() + static_cast<std::ptrdiff_t>(off_opw_),
            flat_.begin() + static_cast<std::ptrdiff_t>(off_opemb_), 0.0);
}

int BrainParams::token_row(const TokenKey& key) const {
  auto it = vocab_index_.find(key);
  if (it != vocab_index_.end()) return it->second;
  return static_cast<int>(vocab_.size()) + static_cast<int>(key.kind);
}

std::size_t BrainParams::off_token(int row) const {
  return static_cast<std::size_t>(row) * static_cast<std::size_t>(cfg_.d_model);
}
std::size_t BrainParams::off_slot(int slot) const {
  return off_slot_ + static_cast<std::size_t>(slot) * static_cast<std::size_t>(cfg_.d_model);
}
std::size_t BrainParams::off_attn(int layer, Phase phase, Proj proj) const {
  const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
  std::size_t idx = (static_cast<std::size_t>(layer) * 2 + static_cast<std::size_t>(phase)) * 4 +
                    static_cast<std::size_t>(proj);
  return off_attn_ + idx * d * d;
}
std::size_t BrainParams::off_op_emb(int rule) const {
  return off_opemb_ + static_cast<std::size_t>(rule) * static_cast<std::size_t>(cfg_.d_model);
}

BrainParams::ConstVecView BrainParams::token(int row) const {
  return {flat_.data() + off_token(row), cfg_.d_model};
}
BrainParams::ConstVecView BrainParams::slot_encoding(int slot) const {
  if (slot >= max_slots_) throw Error("slot encoding index out of range");
  return {flat_.data() + off_slot(slot), cfg_.d_model};
}
BrainParams::ConstMatView BrainParams::attn(int layer, Phase phase, Proj proj) const {
  return {flat_.data() + off_attn(layer, phase, proj), cfg_.d_model, cfg_.d_model};
}
BrainParams::ConstMatView BrainParams::op_head_w() const {
  return {flat_.data() + off_opw_, static_cast<Eigen::Index>(rule_names_.size()), cfg_.d_model};
}
BrainParams::ConstVecView BrainParams::op_head_b() const {
  return {flat_.data() + off_opb_, static_cast<Eigen::Index>(rule_names_.size())};
}
BrainParams::ConstVecView BrainParams::op_embedding(int rule) const {
  return {flat_.data() + off_op_emb(rule), cfg_.d_model};
}
BrainParams::ConstMatView BrainParams::ptr_q() const {
  return {flat_.data() + off_ptrq_, cfg_.d_model, cfg_.d_model};
}
BrainParams::ConstMatView BrainParams::ptr_k() const {
  return {flat_.data() + off_ptrk_, cfg_.d_model, cfg_.d_model};
}
BrainParams::ConstVecView BrainParams::value_w() const {
  return {flat_.data() + off_valw_, cfg_.d_model};
}
double BrainParams::value_b() const { return flat_[off_valb_]; }

const Eigen::VectorXd& BrainParams::positional(int pos) const {
  if (pos < 0 || pos >= cfg_.max_arity)
    throw Error("arity exceeds the positional encoding table");
  return pos_table_[static_cast<std::size_t>(pos)];
}

// ---------------------------------------------------------------------------
// Checkpoint io.

namespace {
template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("checkpoint: truncated file");
  return v;
}
void write_str(std::ostream& os, const std::string& s) {
  write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_str(std::istream& is) {
  auto n = read_pod<std::uint16_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw Error("checkpoint: truncated string");
  return s;
}
}  // namespace

void BrainParams::save(const std::string& path, std::uint64_t episodes_done,
                       std::uint64_t master_seed) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.d_model));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.layers));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.max_arity));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(rule_names_.size()));
  for (const auto& r : rule_names_) write_str(os, r);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(vocab_.size()));
  for (const auto& k : vocab_) {
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(k.kind));
    write_str(os, k.symbol);
  }
  write_pod<std::uint64_t>(os, episodes_done);
  write_pod<std::uint64_t>(os, master_seed);
  write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(flat_.size()));
  os.write(reinterpret_cast<const char*>(flat_.data()),
           static_cast<std::streamsize>(flat_.size() * sizeof(double)));
  if (!os) throw Error("checkpoint: write failed");
}

LoadedBrain BrainParams::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("checkpoint: bad magic (not a parameter checkpoint)");
  auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  BrainConfig cfg;
  cfg.d_model = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.layers = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.max_arity = static_cast<int>(read_pod<std::uint32_t>(is));
  auto n_rules = read_pod<std::uint32_t>(is);
  std::vector<std::string> rules(n_rules);
  for (auto& r : rules) r = read_str(is);
  auto n_vocab = read_pod<std::uint32_t>(is);
  std::vector<TokenKey> vocab(n_vocab);
  for (auto& k : vocab) {
    k.kind = static_cast<TokenKind>(read_pod<std::uint8_t>(is));
    k.symbol = read_str(is);
  }
  auto episodes = read_pod<std::uint64_t>(is);
  auto seed = read_pod<std::uint64_t>(is);
  auto n_params = read_pod<std::uint64_t>(is);
  BrainParams params(cfg, std::move(rules), std::move(vocab));
  if (n_params != params.size()) throw Error("checkpoint: parameter count mismatch");
  is.read(reinterpret_cast<char*>(params.flat_.data()),
          static_cast<std::streamsize>(n_params * sizeof(double)));
  if (!is) throw Error("checkpoint: truncated parameters");
  return {std::move(params), episodes, seed};
}

// ---------------------------------------------------------------------------
// Encoder forward.

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& s) {
  double mx = s.maxCoeff();
  Eigen::VectorXd e = (s.array() - mx).exp();
  return e / e.sum();
}

EncodeCache::Ln ln_forward(Eigen::VectorXd in) {
  EncodeCache::Ln ln;
  double mu = in.mean();
  double var = (in.array() - mu).square().mean();
  ln.mu = mu;
  ln.istd = 1.0 / std::sqrt(var + kLnEps);
  ln.out = ((in.array() - mu) * ln.istd).matrix();
  ln.in = std::move(in);
  return ln;
}

Eigen::VectorXd ln_backward(const EncodeCache::Ln& ln, const Eigen::VectorXd& dout) {
  double m1 = dout.mean();
  double m2 = (dout.array() * ln.out.array()).mean();
  return (ln.istd * (dout.array() - m1 - ln.out.array() * m2)).matrix();
}

struct AttnWeights {
  BrainParams::ConstMatView wq, wk, wv, wo;
};

AttnWeights attn_weights(const BrainParams& p, int layer, BrainParams::Phase phase) {
  return {p.attn(layer, phase, BrainParams::Proj::Q), p.attn(layer, phase, BrainParams::Proj::K),
          p.attn(layer, phase, BrainParams::Proj::V), p.attn(layer, phase, BrainParams::Proj::O)};
}

EncodeCache::Attn attn_forward(const AttnWeights& w, const Eigen::VectorXd& query,
                               std::vector<int> input_ids, std::vector<int> pos_ids,
                               const std::vector<Eigen::VectorXd>& xs) {
  EncodeCache::Attn a;
  a.inputs = std::move(input_ids);
  a.pos = std::move(pos_ids);
  const int k = static_cast<int>(xs.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.size()));
  a.q = w.wq * query;
  a.k.reserve(xs.size());
  a.v.reserve(xs.size());
  Eigen::VectorXd scores(k);
  for (int j = 0; j < k; ++j) {
    a.k.push_back(w.wk * xs[static_cast<std::size_t>(j)]);
    a.v.push_back(w.wv * xs[static_cast<std::size_t>(j)]);
    scores(j) = a.q.dot(a.k.back()) * scale;
  }
  a.w = softmax(scores);
  a.z = Eigen::VectorXd::Zero(query.size());
  for (int j = 0; j < k; ++j) a.z += a.w(j) * a.v[static_cast<std::size_t>(j)];
  return a;
}

struct Neighborhoods {
  std::vector<std::vector<int>> edge_inputs;  // per edge: attended entity indices
  std::vector<std::vector<int>> parents;      // per entity: consuming edge indices
};

Neighborhoods neighborhoods(const MathState& state) {
  Neighborhoods nb;
  const int n_nodes = static_cast<int>(state.node_count());
  nb.edge_inputs.resize(state.edge_count());
  nb.parents.resize(state.entity_count());
  for (const Hyperedge& e : state.edges()) {
    std::vector<int> in;
    for (EntityRef ref : state.encode_inputs(e.id)) {
      in.push_back(ref.is_node() ? static_cast<int>(ref.id)
                                 : n_nodes + static_cast<int>(ref.id));
    }
    int edge_idx = n_nodes + static_cast<int>(e.id);
    for (int idx : in) {
      auto& ps = nb.parents[static_cast<std::size_t>(idx)];
      if (ps.empty() || ps.back() != edge_idx) ps.push_back(edge_idx);
    }
    nb.edge_inputs[e.id] = std::move(in);
  }
  return nb;
}

}  // namespace

EncodeCache encode(const MathState& state, const BrainParams& params) {
  EncodeCache cache;
  const int n_nodes = static_cast<int>(state.node_count());
  const int n = static_cast<int>(state.entity_count());
  cache.n_nodes = n_nodes;
  cache.n_entities = n;
  const int d = params.d();

  Neighborhoods nb = neighborhoods(state);
  for (const auto& in : nb.edge_inputs) {
    if (static_cast<int>(in.size()) > params.config().max_arity)
      throw Error("arity exceeds the positional encoding table");
  }

  cache.h0.resize(static_cast<std::size_t>(n));
  for (const Node& nd : state.nodes())
    cache.h0[nd.id] = params.token(params.token_row(token_key_of(state, node_ref(nd.id))));
  for (const Hyperedge& e : state.edges())
    cache.h0[static_cast<std::size_t>(n_nodes) + e.id] =
        params.token(params.token_row(token_key_of(state, edge_ref(e.id))));

  const std::vector<Eigen::VectorXd>* h_prev = &cache.h0;
  cache.layers.resize(static_cast<std::size_t>(params.layers()));
  for (int l = 0; l < params.layers(); ++l) {
    EncodeCache::Layer& layer = cache.layers[static_cast<std::size_t>(l)];
    AttnWeights wc = attn_weights(params, l, BrainParams::Phase::Composition);
    AttnWeights wx = attn_weights(params, l, BrainParams::Phase::Contextualization);

    // Composition: each edge attends over its ordered, position-tagged inputs.
    layer.h_half.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n_nodes; ++i)
      layer.h_half[static_cast<std::size_t>(i)] = (*h_prev)[static_cast<std::size_t>(i)];
    layer.attn_comp.resize(state.edge_count());
    layer.ln_comp.resize(state.edge_count());
    for (const Hyperedge& e : state.edges()) {
      int ei = n_nodes + static_cast<int>(e.id);
      const auto& inputs = nb.edge_inputs[e.id];
      std::vector<int> pos_ids(inputs.size());
      std::vector<Eigen::VectorXd> xs(inputs.size());
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        pos_ids[j] = static_cast<int>(j);
        xs[j] = (*h_prev)[static_cast<std::size_t>(inputs[j])] +
                params.positional(static_cast<int>(j));
      }
      EncodeCache::Attn a =
          attn_forward(wc, (*h_prev)[static_cast<std::size_t>(ei)], inputs, std::move(pos_ids), xs);
      Eigen::VectorXd pre = (*h_prev)[static_cast<std::size_t>(ei)] + wc.wo * a.z;
      layer.attn_comp[e.id] = std::move(a);
      layer.ln_comp[e.id] = ln_forward(std::move(pre));
      layer.h_half[static_cast<std::size_t>(ei)] = layer.ln_comp[e.id].out;
    }

    // Contextualization: every entity attends over its parents' half-step
    // embeddings; parent-free entities take the residual path through LN.
    layer.attn_ctx.resize(static_cast<std::size_t>(n));
    layer.ln_ctx.resize(static_cast<std::size_t>(n));
    layer.h_out.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd& base = layer.h_half[static_cast<std::size_t>(i)];
      const auto& parents = nb.parents[static_cast<std::size_t>(i)];
      if (parents.empty()) {
        layer.attn_ctx[static_cast<std::size_t>(i)] = EncodeCache::Attn{};
        layer.ln_ctx[static_cast<std::size_t>(i)] = ln_forward(base);
      } else {
        std::vector<Eigen::VectorXd> xs(parents.size());
        for (std::size_t j = 0; j < parents.size(); ++j)
          xs[j] = layer.h_half[static_cast<std::size_t>(parents[j])];
        std::vector<int> pos_ids(parents.size(), -1);
        EncodeCache::Attn a = attn_forward(wx, base, parents, std::move(pos_ids), xs);
        Eigen::VectorXd pre = base + wx.wo * a.z;
        layer.attn_ctx[static_cast<std::size_t>(i)] = std::move(a);
        layer.ln_ctx[static_cast<std::size_t>(i)] = ln_forward(std::move(pre));
      }
      layer.h_out[static_cast<std::size_t>(i)] = layer.ln_ctx[static_cast<std::size_t>(i)].out;
    }
    h_prev = &layer.h_out;
  }

  cache.pooled = Eigen::VectorXd::Zero(d);
  for (const auto& h : *h_prev) cache.pooled += h;
  cache.pooled /= static_cast<double>(n);
  return cache;
}

// ---------------------------------------------------------------------------
// Encoder backward.

namespace {

struct GradSink {
  Eigen::VectorXd& dflat;

  using MatG = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using VecG = Eigen::Map<Eigen::VectorXd>;

  MatG mat(std::size_t off, int rows, int cols) { return {dflat.data() + off, rows, cols}; }
  VecG vec(std::size_t off, int size) { return {dflat.data() + off, size}; }
};

template <typename AddDxq, typename AddDx>
void attn_backward(const AttnWeights& w, const EncodeCache::Attn& a, const Eigen::VectorXd& query,
                   const std::vector<Eigen::VectorXd>& xs, const Eigen::VectorXd& dout_o,
                   GradSink& sink, std::size_t off_q, std::size_t off_k, std::size_t off_v,
                   std::size_t off_o, AddDxq add_dxq, AddDx add_dx) {
  const int d = static_cast<int>(query.size());
  const int k = static_cast<int>(xs.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Eigen::VectorXd dz = w.wo.transpose() * dout_o;
  sink.mat(off_o, d, d) += dout_o * a.z.transpose();

  Eigen::VectorXd dw(k);
  for (int j = 0; j < k; ++j) dw(j) = dz.dot(a.v[static_cast<std::size_t>(j)]);
  double common = a.w.dot(dw);
  Eigen::VectorXd dq = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < k; ++j) {
    double ds = a.w(j) * (dw(j) - common);
    Eigen::VectorXd dk = ds * scale * a.q;
    Eigen::VectorXd dv = a.w(j) * dz;
    dq += ds * scale * a.k[static_cast<std::size_t>(j)];
    sink.mat(off_k, d, d) += dk * xs[static_cast<std::size_t>(j)].transpose();
    sink.mat(off_v, d, d) += dv * xs[static_cast<std::size_t>(j)].transpose();
    add_dx(j, (w.wk.transpose() * dk + w.wv.transpose() * dv).eval());
  }
  sink.mat(off_q, d, d) += dq * query.transpose();
  add_dxq((w.wq.transpose() * dq).eval());
}

void encode_backward(const MathState& state, const BrainParams& params, const EncodeCache& cache,
                     std::vector<Eigen::VectorXd> dh, const Eigen::VectorXd& dpooled,
                     Eigen::VectorXd& dflat) {
  const int n = cache.n_entities;
  const int n_nodes = cache.n_nodes;
  const int d = params.d();
  GradSink sink{dflat};

  for (int i = 0; i < n; ++i)
    dh[static_cast<std::size_t>(i)] += dpooled / static_cast<double>(n);

  for (int l = params.layers() - 1; l >= 0; --l) {
    const EncodeCache::Layer& layer = cache.layers[static_cast<std::size_t>(l)];
    const std::vector<Eigen::VectorXd>& h_prev =
        l == 0 ? cache.h0 : cache.layers[static_cast<std::size_t>(l - 1)].h_out;
    AttnWeights wc = attn_weights(params, l, BrainParams::Phase::Composition);
    AttnWeights wx = attn_weights(params, l, BrainParams::Phase::Contextualization);
    const std::size_t xq = params.off_attn(l, BrainParams::Phase::Contextualization, BrainParams::Proj::Q);
    const std::size_t xk = params.off_attn(l, BrainParams::Phase::Contextualization, BrainParams::Proj::K);
    const std::size_t xv = params.off_attn(l, BrainParams::Phase::Contextualization, BrainParams::Proj::V);
    const std::size_t xo = params.off_attn(l, BrainParams::Phase::Contextualization, BrainParams::Proj::O);
    const std::size_t cq = params.off_attn(l, BrainParams::Phase::Composition, BrainParams::Proj::Q);
    const std::size_t ck = params.off_attn(l, BrainParams::Phase::Composition, BrainParams::Proj::K);
    const std::size_t cv = params.off_attn(l, BrainParams::Phase::Composition, BrainParams::Proj::V);
    const std::size_t co = params.off_attn(l, BrainParams::Phase::Composition, BrainParams::Proj::O);

    std::vector<Eigen::VectorXd> dh_half(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(d));
    std::vector<Eigen::VectorXd> dh_prev(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(d));

    // Contextualization backward.
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd dpre = ln_backward(layer.ln_ctx[static_cast<std::size_t>(i)],
                                         dh[static_cast<std::size_t>(i)]);
      const EncodeCache::Attn& a = layer.attn_ctx[static_cast<std::size_t>(i)];
      Eigen::VectorXd dbase = dpre;
      if (!a.inputs.empty()) {
        std::vector<Eigen::VectorXd> xs(a.inputs.size());
        for (std::size_t j = 0; j < a.inputs.size(); ++j)
          xs[j] = layer.h_half[static_cast<std::size_t>(a.inputs[j])];
        attn_backward(
            wx, a, layer.h_half[static_cast<std::size_t>(i)], xs, dpre, sink, xq, xk, xv, xo,
            [&](const Eigen::VectorXd& gq) { dbase += gq; },
            [&](int j, const Eigen::VectorXd& gx) {
              dh_half[static_cast<std::size_t>(a.inputs[static_cast<std::size_t>(j)])] += gx;
            });
      }
      if (i >= n_nodes)
        dh_half[static_cast<std::size_t>(i)] += dbase;
      else
        dh_prev[static_cast<std::size_t>(i)] += dbase;
    }

    // Composition backward (edges only).
    for (int e = static_cast<int>(state.edge_count()) - 1; e >= 0; --e) {
      int ei = n_nodes + e;
      Eigen::VectorXd dpre = ln_backward(layer.ln_comp[static_cast<std::size_t>(e)],
                                         dh_half[static_cast<std::size_t>(ei)]);
      const EncodeCache::Attn& a = layer.attn_comp[static_cast<std::size_t>(e)];
      Eigen::VectorXd dquery = dpre;  // residual path
      std::vector<Eigen::VectorXd> xs(a.inputs.size());
      for (std::size_t j = 0; j < a.inputs.size(); ++j)
        xs[j] = h_prev[static_cast<std::size_t>(a.inputs[j])] + params.positional(a.pos[j]);
      attn_backward(
          wc, a, h_prev[static_cast<std::size_t>(ei)], xs, dpre, sink, cq, ck, cv, co,
          [&](const Eigen::VectorXd& gq) { dquery += gq; },
          [&](int j, const Eigen::VectorXd& gx) {
            dh_prev[static_cast<std::size_t>(a.inputs[static_cast<std::size_t>(j)])] += gx;
          });
      dh_prev[static_cast<std::size_t>(ei)] += dquery;
    }

    dh = std::move(dh_prev);
  }

  for (const Node& nd : state.nodes()) {
    int row = params.token_row(token_key_of(state, node_ref(nd.id)));
    sink.vec(params.off_token(row), d) += dh[nd.id];
  }
  for (const Hyperedge& e : state.edges()) {
    int row = params.token_row(token_key_of(state, edge_ref(e.id)));
    sink.vec(params.off_token(row), d) += dh[static_cast<std::size_t>(n_nodes) + e.id];
  }
}

// ---------------------------------------------------------------------------
// Policy forward, shared by policy() and grad_log_policy().

struct PrefixNode {
  int parent = -1;
  int chosen_entity = -1;  // entity picked at the parent to reach this node
  int op = -1;
  int slot = 0;
  Eigen::VectorXd s;  // op embedding plus chosen-operand embeddings
  Eigen::VectorXd q;
  std::vector<int> cand;
  Eigen::VectorXd probs;
  std::map<int, int> children;
  std::map<int, double> choice_coef;  // backward accumulator
  Eigen::VectorXd ds;
};

struct PolicyCache {
  EncodeCache enc;
  std::vector<int> present_ops;
  Eigen::VectorXd op_logits;
  Eigen::VectorXd op_probs;
  std::map<int, int> op_pos;
  std::map<int, int> op_root;
  std::vector<PrefixNode> pool;
  std::vector<Eigen::VectorXd> keys;
  std::vector<double> p_unnorm;
  std::vector<double> probs;
  std::vector<std::vector<double>> slot_probs;
  std::vector<std::vector<int>> action_path;  // pool node per slot, per action
  double z = 0.0;
};

EntityRef entity_of(const EncodeCache& cache, int idx) {
  if (idx < cache.n_nodes) return node_ref(static_cast<NodeId>(idx));
  return edge_ref(static_cast<EdgeId>(idx - cache.n_nodes));
}

PolicyCache policy_forward(const MathState& state, const BrainParams& params,
                           const RuleLibrary& lib, const std::vector<Action>& legal) {
  if (legal.empty()) throw Error("policy: empty legal action set");
  PolicyCache pc;
  pc.enc = encode(state, params);
  const auto& h = pc.enc.final_embeddings();
  const int n = pc.enc.n_entities;
  const int d = params.d();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  pc.keys.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    pc.keys[static_cast<std::size_t>(i)] = params.ptr_k() * h[static_cast<std::size_t>(i)];

  for (const Action& a : legal) {
    if (std::find(pc.present_ops.begin(), pc.present_ops.end(), a.rule) == pc.present_ops.end())
      pc.present_ops.push_back(a.rule);
  }
  std::sort(pc.present_ops.begin(), pc.present_ops.end());
  pc.op_logits.resize(static_cast<Eigen::Index>(pc.present_ops.size()));
  for (std::size_t i = 0; i < pc.present_ops.size(); ++i) {
    int r = pc.present_ops[i];
    pc.op_logits(static_cast<Eigen::Index>(i)) =
        params.op_head_w().row(r).dot(pc.enc.pooled) + params.op_head_b()(r);
    pc.op_pos[r] = static_cast<int>(i);
  }
  pc.op_probs = softmax(pc.op_logits);

  auto make_node = [&](int parent, int chosen, int op, int slot) {
    PrefixNode node;
    node.parent = parent;
    node.chosen_entity = chosen;
    node.op = op;
    node.slot = slot;
    if (parent < 0)
      node.s = params.op_embedding(op);
    else
      node.s = pc.pool[static_cast<std::size_t>(parent)].s + h[static_cast<std::size_t>(chosen)];
    pc.pool.push_back(std::move(node));
    return static_cast<int>(pc.pool.size() - 1);
  };

  auto fill_distribution = [&](int node_idx, int rule) {
    PrefixNode& node = pc.pool[static_cast<std::size_t>(node_idx)];
    if (!node.cand.empty()) return;
    const RuleSpec& spec = lib.rule(static_cast<std::size_t>(rule));
    SlotClass cls = spec.slots[static_cast<std::size_t>(node.slot)];
    for (int i = 0; i < n; ++i) {
      if (lib.slot_accepts(state, cls, entity_of(pc.enc, i))) node.cand.push_back(i);
    }
    if (node.cand.empty()) throw Error("policy: slot with no type-valid entities");
    node.q = params.ptr_q() * (node.s + params.slot_encoding(node.slot));
    Eigen::VectorXd scores(static_cast<Eigen::Index>(node.cand.size()));
    for (std::size_t j = 0; j < node.cand.size(); ++j)
      scores(static_cast<Eigen::Index>(j)) =
          node.q.dot(pc.keys[static_cast<std::size_t>(node.cand[j])]) * scale;
    node.probs = softmax(scores);
  };

  pc.p_unnorm.resize(legal.size());
  pc.slot_probs.resize(legal.size());
  pc.action_path.resize(legal.size());
  for (std::size_t ai = 0; ai < legal.size(); ++ai) {
    const Action& a = legal[ai];
    int rule = a.rule;
    int node_idx;
    auto root_it = pc.op_root.find(rule);
    if (root_it == pc.op_root.end()) {
      node_idx = make_node(-1, -1, rule, 0);
      pc.op_root[rule] = node_idx;
    } else {
      node_idx = root_it->second;
    }
    double p = pc.op_probs(pc.op_pos.at(rule));
    for (std::size_t slot = 0; slot < a.operands.size(); ++slot) {
      fill_distribution(node_idx, rule);
      PrefixNode& node = pc.pool[static_cast<std::size_t>(node_idx)];
      int entity = pc.enc.entity_index(a.operands[slot]);
      auto pos = std::find(node.cand.begin(), node.cand.end(), entity);
      if (pos == node.cand.end())
        throw Error("policy: legal action operand fails its own slot mask");
      double pi_slot = node.probs(static_cast<Eigen::Index>(pos - node.cand.begin()));
      pc.slot_probs[ai].push_back(pi_slot);
      pc.action_path[ai].push_back(node_idx);
      p *= pi_slot;
      if (slot + 1 < a.operands.size()) {
        auto child = node.children.find(entity);
        if (child == node.children.end()) {
          int fresh = make_node(node_idx, entity, rule, static_cast<int>(slot) + 1);
          pc.pool[static_cast<std::size_t>(node_idx)].children[entity] = fresh;
          node_idx = fresh;
        } else {
          node_idx = child->second;
        }
      }
    }
    pc.p_unnorm[ai] = p;
  }
  pc.z = 0.0;
  for (double p : pc.p_unnorm) pc.z += p;
  pc.probs.resize(legal.size());
  for (std::size_t i = 0; i < legal.size(); ++i) pc.probs[i] = pc.p_unnorm[i] / pc.z;
  return pc;
}

}  // namespace

ActionDistribution policy(const MathState& state, const BrainParams& params,
                          const RuleLibrary& lib, const std::vector<Action>& legal) {
  PolicyCache pc = policy_forward(state, params, lib, legal);
  ActionDistribution dist;
  dist.action_probs = pc.probs;
  dist.slot_probs = pc.slot_probs;
  for (std::size_t i = 0; i < pc.present_ops.size(); ++i) {
    dist.op_probs[params.rule_names()[static_cast<std::size_t>(pc.present_ops[i])]] =
        pc.op_probs(static_cast<Eigen::Index>(i));
  }
  return dist;
}

double value(const MathState& state, const BrainParams& params) {
  EncodeCache enc = encode(state, params);
  double logit = params.value_w().dot(enc.pooled) + params.value_b();
  return 1.0 / (1.0 + std::exp(-logit));
}

Eigen::VectorXd grad_log_policy(const MathState& state, const BrainParams& params,
                                const RuleLibrary& lib, const std::vector<Action>& legal,
                                std::size_t action_index, double* log_prob) {
  if (action_index >= legal.size()) throw Error("grad_log_policy: action index out of range");
  PolicyCache pc = policy_forward(state, params, lib, legal);
  if (log_prob) *log_prob = std::log(std::max(pc.probs[action_index], 1e-300));

  const int d = params.d();
  const int n = pc.enc.n_entities;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::VectorXd dflat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  GradSink sink{dflat};
  std::vector<Eigen::VectorXd> dh(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(d));
  Eigen::VectorXd dpooled = Eigen::VectorXd::Zero(d);
  std::vector<Eigen::VectorXd> dkeys(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(d));

  // d log pi(a) = d log p(a) - sum_b pi(b) d log p(b); coefficients sum to 0.
  std::vector<double> coef(legal.size());
  for (std::size_t b = 0; b < legal.size(); ++b)
    coef[b] = (b == action_index ? 1.0 : 0.0) - pc.probs[b];

  std::vector<double> op_coef(pc.present_ops.size(), 0.0);
  for (std::size_t b = 0; b < legal.size(); ++b)
    op_coef[static_cast<std::size_t>(pc.op_pos.at(legal[b].rule))] += coef[b];
  for (std::size_t i = 0; i < pc.present_ops.size(); ++i) {
    int r = pc.present_ops[i];
    double dlogit = op_coef[i];
    if (dlogit == 0.0) continue;
    sink.vec(params.off_op_w() + static_cast<std::size_t>(r) * static_cast<std::size_t>(d), d) +=
        dlogit * pc.enc.pooled;
    dflat(static_cast<Eigen::Index>(params.off_op_b() + static_cast<std::size_t>(r))) += dlogit;
    dpooled += dlogit * params.op_head_w().row(r).transpose();
  }

  for (std::size_t b = 0; b < legal.size(); ++b) {
    const Action& a = legal[b];
    for (std::size_t slot = 0; slot < a.operands.size(); ++slot) {
      int node_idx = pc.action_path[b][slot];
      int entity = pc.enc.entity_index(a.operands[slot]);
      pc.pool[static_cast<std::size_t>(node_idx)].choice_coef[entity] += coef[b];
    }
  }

  // Reverse creation order: children flush their query-state gradient into
  // parents, then each node handles its own slot distribution.
  for (int ni = static_cast<int>(pc.pool.size()) - 1; ni >= 0; --ni) {
    PrefixNode& node = pc.pool[static_cast<std::size_t>(ni)];
    if (node.ds.size() == 0) node.ds = Eigen::VectorXd::Zero(d);
    if (!node.choice_coef.empty()) {
      double total = 0.0;
      for (const auto& [c, t] : node.choice_coef) total += t;
      Eigen::VectorXd dq = Eigen::VectorXd::Zero(d);
      for (std::size_t j = 0; j < node.cand.size(); ++j) {
        int c = node.cand[j];
        auto it = node.choice_coef.find(c);
        double tc = it == node.choice_coef.end() ? 0.0 : it->second;
        double dscore = tc - node.probs(static_cast<Eigen::Index>(j)) * total;
        if (dscore == 0.0) continue;
        dq += dscore * scale * pc.keys[static_cast<std::size_t>(c)];
        dkeys[static_cast<std::size_t>(c)] += dscore * scale * node.q;
      }
      sink.mat(params.off_ptr_q(), d, d) +=
          dq * (node.s + params.slot_encoding(node.slot)).transpose();
      Eigen::VectorXd dsplus = params.ptr_q().transpose() * dq;
      sink.vec(params.off_slot(node.slot), d) += dsplus;
      node.ds += dsplus;
    }
    if (node.ds.squaredNorm() > 0.0) {
      if (node.parent >= 0) {
        PrefixNode& parent = pc.pool[static_cast<std::size_t>(node.parent)];
        if (parent.ds.size() == 0) parent.ds = Eigen::VectorXd::Zero(d);
        parent.ds += node.ds;
        dh[static_cast<std::size_t>(node.chosen_entity)] += node.ds;
      } else {
        sink.vec(params.off_op_emb(node.op), d) += node.ds;
      }
    }
  }

  const auto& h = pc.enc.final_embeddings();
  for (int c = 0; c < n; ++c) {
    const Eigen::VectorXd& dk = dkeys[static_cast<std::size_t>(c)];
    if (dk.squaredNorm() == 0.0) continue;
    sink.mat(params.off_ptr_k(), d, d) += dk * h[static_cast<std::size_t>(c)].transpose();
    dh[static_cast<std::size_t>(c)] += params.ptr_k().transpose() * dk;
  }

  encode_backward(state, params, pc.enc, std::move(dh), dpooled, dflat);
  return dflat;
}

Eigen::VectorXd grad_value_loss(const MathState& state, const BrainParams& params, double target,
                                double* value_out) {
  EncodeCache enc = encode(state, params);
  const int d = params.d();
  double logit = params.value_w().dot(enc.pooled) + params.value_b();
  double v = 1.0 / (1.0 + std::exp(-logit));
  if (value_out) *value_out = v;

  Eigen::VectorXd dflat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  GradSink sink{dflat};
  double dlogit = 2.0 * (v - target) * v * (1.0 - v);
  sink.vec(params.off_value_w(), d) += dlogit * enc.pooled;
  dflat(static_cast<Eigen::Index>(params.off_value_b())) += dlogit;
  Eigen::VectorXd dpooled = dlogit * params.value_w();

  std::vector<Eigen::VectorXd> dh(static_cast<std::size_t>(enc.n_entities),
                                  Eigen::VectorXd::Zero(d));
  encode_backward(state, params, enc, std::move(dh), dpooled, dflat);
  return dflat;
}

}  // namespace mathesis
