#include "histsem/toy_model.hpp"

#include <cmath>

#include "histsem/error.hpp"
#include "histsem/random.hpp"

namespace histsem {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInitStd = 0.02;
constexpr double kLnEps = 1e-12;

struct LnCache {
  MatrixXd xhat;
  VectorXd inv_std;
};

MatrixXd layer_norm(const MatrixXd& x, const MatrixXd& gamma, const MatrixXd& beta, LnCache& cache) {
  const VectorXd mean = x.rowwise().mean();
  const MatrixXd centered = x.colwise() - mean;
  const VectorXd var = centered.array().square().rowwise().mean().matrix();
  cache.inv_std = (var.array() + kLnEps).rsqrt().matrix();
  cache.xhat = (centered.array().colwise() * cache.inv_std.array()).matrix();
  return ((cache.xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array()).matrix();
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const LnCache& cache, const MatrixXd& gamma,
                             MatrixXd& dgamma, MatrixXd& dbeta) {
  dgamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbeta += dy.colwise().sum();
  const Eigen::ArrayXXd dxhat = dy.array().rowwise() * gamma.row(0).array();
  const Eigen::ArrayXd mean_dxhat = dxhat.rowwise().mean();
  const Eigen::ArrayXd mean_dxhat_xhat = (dxhat * cache.xhat.array()).rowwise().mean();
  const Eigen::ArrayXXd dx =
      (dxhat.colwise() - mean_dxhat) - (cache.xhat.array().colwise() * mean_dxhat_xhat);
  return (dx.colwise() * cache.inv_std.array()).matrix();
}

void softmax_rows(MatrixXd& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
}

struct LayerCache {
  MatrixXd x, q, k, v, attn, ctx, y, hpre, h;
  LnCache ln1, ln2;
};

MatrixXd layer_forward(const LayerParams& p, const MatrixXd& x, LayerCache& c) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  c.x = x;
  c.q = (x * p.wq).rowwise() + p.bq.row(0);
  c.k = (x * p.wk).rowwise() + p.bk.row(0);
  c.v = (x * p.wv).rowwise() + p.bv.row(0);
  c.attn = c.q * c.k.transpose() * scale;
  softmax_rows(c.attn);
  c.ctx = c.attn * c.v;
  const MatrixXd attended = (c.ctx * p.wo).rowwise() + p.bo.row(0);
  c.y = layer_norm(x + attended, p.ln1_g, p.ln1_b, c.ln1);
  c.hpre = (c.y * p.w1).rowwise() + p.b1.row(0);
  c.h = c.hpre.cwiseMax(0.0);
  const MatrixXd z = (c.h * p.w2).rowwise() + p.b2.row(0);
  return layer_norm(c.y + z, p.ln2_g, p.ln2_b, c.ln2);
}

MatrixXd layer_backward(const LayerParams& p, const LayerCache& c, const MatrixXd& dout, LayerParams& g) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.x.cols()));
  const MatrixXd dr2 = layer_norm_backward(dout, c.ln2, p.ln2_g, g.ln2_g, g.ln2_b);
  g.w2.noalias() += c.h.transpose() * dr2;
  g.b2 += dr2.colwise().sum();
  MatrixXd dhpre = dr2 * p.w2.transpose();
  dhpre = dhpre.cwiseProduct((c.hpre.array() > 0.0).cast<double>().matrix());
  g.w1.noalias() += c.y.transpose() * dhpre;
  g.b1 += dhpre.colwise().sum();
  const MatrixXd dy = dr2 + dhpre * p.w1.transpose();

  const MatrixXd dr1 = layer_norm_backward(dy, c.ln1, p.ln1_g, g.ln1_g, g.ln1_b);
  g.wo.noalias() += c.ctx.transpose() * dr1;
  g.bo += dr1.colwise().sum();
  const MatrixXd dctx = dr1 * p.wo.transpose();
  const MatrixXd dattn = dctx * c.v.transpose();
  const MatrixXd dv = c.attn.transpose() * dctx;
  const VectorXd row_dot = (dattn.array() * c.attn.array()).rowwise().sum().matrix();
  const MatrixXd dscores =
      ((dattn.colwise() - row_dot).array() * c.attn.array()).matrix() * scale;
  const MatrixXd dq = dscores * c.k;
  const MatrixXd dk = dscores.transpose() * c.q;

  g.wq.noalias() += c.x.transpose() * dq;
  g.bq += dq.colwise().sum();
  g.wk.noalias() += c.x.transpose() * dk;
  g.bk += dk.colwise().sum();
  g.wv.noalias() += c.x.transpose() * dv;
  g.bv += dv.colwise().sum();
  return dr1 + dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
}

MatrixXd random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
  // Fill row-major so the draw order matches the serialized layout.
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = kInitStd * rng.normal();
  }
  return m;
}

MatrixXd zeros(std::size_t rows, std::size_t cols) {
  return MatrixXd::Zero(static_cast<Index>(rows), static_cast<Index>(cols));
}

MatrixXd ones(std::size_t cols) { return MatrixXd::Ones(1, static_cast<Index>(cols)); }

void check_instance(const TrainingInstance& instance, const ModelDims& dims) {
  if (instance.ids.empty() || instance.ids.size() != instance.segments.size()) {
    throw InputError("training instance has inconsistent ids/segments");
  }
  if (instance.ids.size() > dims.max_positions) throw InputError("sequence longer than the position table");
  if (instance.mlm_positions.size() != instance.mlm_labels.size()) {
    throw InputError("training instance has inconsistent MLM positions/labels");
  }
}

ModelDims dims_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind() != EncoderKind::kToy) throw InputError("not a toy checkpoint");
  ModelDims dims;
  const auto& cfg = ckpt.config();
  dims.vocab_size = ckpt.vocab().size();
  dims.hidden_dim = cfg.hidden_dim;
  dims.num_layers = cfg.num_layers;
  dims.ffn_dim = 4 * cfg.hidden_dim;
  for (const auto& b : ckpt.params()) {
    if (b.name == "embeddings.position") dims.max_positions = b.rows;
  }
  return dims;
}

}  // namespace

std::vector<MatrixXd*> ModelParams::tensors() {
  std::vector<MatrixXd*> out;
  visit(*this, [&](const std::string&, MatrixXd& m) { out.push_back(&m); });
  return out;
}

std::vector<const MatrixXd*> ModelParams::tensors() const {
  std::vector<const MatrixXd*> out;
  visit(*this, [&](const std::string&, const MatrixXd& m) { out.push_back(&m); });
  return out;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out = *this;
  out.set_zero();
  return out;
}

void ModelParams::set_zero() {
  visit(*this, [](const std::string&, MatrixXd& m) { m.setZero(); });
}

double ModelParams::squared_norm() const {
  double total = 0.0;
  visit(*this, [&](const std::string&, const MatrixXd& m) { total += m.squaredNorm(); });
  return total;
}

void ModelParams::add_scaled(const ModelParams& other, double alpha) {
  const auto theirs = other.tensors();
  const auto mine = tensors();
  for (std::size_t i = 0; i < mine.size(); ++i) *mine[i] += alpha * *theirs[i];
}

ToyModel::ToyModel(const ModelDims& dims, std::uint64_t seed) : dims_(dims) {
  if (dims.vocab_size == 0 || dims.max_positions == 0 || dims.hidden_dim == 0 || dims.num_layers == 0 ||
      dims.ffn_dim == 0) {
    throw InputError("toy model dimensions must be positive");
  }
  Rng rng(seed);
  const auto h = dims.hidden_dim;
  const auto f = dims.ffn_dim;
  params_.tok = random_matrix(rng, dims.vocab_size, h);
  params_.pos = random_matrix(rng, dims.max_positions, h);
  params_.seg = random_matrix(rng, 2, h);
  params_.emb_ln_g = ones(h);
  params_.emb_ln_b = zeros(1, h);
  params_.layers.resize(dims.num_layers);
  for (auto& layer : params_.layers) {
    layer.wq = random_matrix(rng, h, h);
    layer.bq = zeros(1, h);
    layer.wk = random_matrix(rng, h, h);
    layer.bk = zeros(1, h);
    layer.wv = random_matrix(rng, h, h);
    layer.bv = zeros(1, h);
    layer.wo = random_matrix(rng, h, h);
    layer.bo = zeros(1, h);
    layer.ln1_g = ones(h);
    layer.ln1_b = zeros(1, h);
    layer.w1 = random_matrix(rng, h, f);
    layer.b1 = zeros(1, f);
    layer.w2 = random_matrix(rng, f, h);
    layer.b2 = zeros(1, h);
    layer.ln2_g = ones(h);
    layer.ln2_b = zeros(1, h);
  }
  params_.mlm_bias = zeros(1, dims.vocab_size);
  params_.nsp_w = random_matrix(rng, h, 2);
  params_.nsp_b = zeros(1, 2);
}

ToyModel::ToyModel(const Checkpoint& checkpoint) : ToyModel(dims_from_checkpoint(checkpoint), 0) {
  const auto& blocks = checkpoint.params();
  std::size_t i = 0;
  ModelParams::visit(params_, [&](const std::string& name, MatrixXd& m) {
    if (i >= blocks.size()) throw InputError("checkpoint is missing parameter block " + name);
    const ParamBlock& b = blocks[i++];
    if (b.name != name || b.rows != static_cast<std::size_t>(m.rows()) ||
        b.cols != static_cast<std::size_t>(m.cols())) {
      throw MismatchError("checkpoint block '" + b.name + "' does not match expected '" + name + "'");
    }
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = b.data[static_cast<std::size_t>(r * m.cols() + c)];
    }
  });
  if (i != blocks.size()) throw MismatchError("checkpoint has unexpected extra parameter blocks");
}

std::vector<ParamBlock> ToyModel::to_blocks() const {
  std::vector<ParamBlock> blocks;
  ModelParams::visit(params_, [&](const std::string& name, const MatrixXd& m) {
    ParamBlock b{name, static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), {}};
    b.data.reserve(b.rows * b.cols);
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) b.data.push_back(static_cast<float>(m(r, c)));
    }
    blocks.push_back(std::move(b));
  });
  return blocks;
}

namespace {

struct ForwardCache {
  MatrixXd embedded;
  LnCache emb_ln;
  std::vector<LayerCache> layers;
  std::vector<MatrixXd> outputs;
};

void forward(const ModelParams& p, std::span<const int> ids, std::span<const int> segments, ForwardCache& cache) {
  const auto n = static_cast<Index>(ids.size());
  MatrixXd e(n, p.tok.cols());
  for (Index i = 0; i < n; ++i) {
    e.row(i) = p.tok.row(ids[static_cast<std::size_t>(i)]) + p.pos.row(i) + p.seg.row(segments[static_cast<std::size_t>(i)]);
  }
  MatrixXd x = layer_norm(e, p.emb_ln_g, p.emb_ln_b, cache.emb_ln);
  cache.layers.resize(p.layers.size());
  cache.outputs.clear();
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    x = layer_forward(p.layers[l], x, cache.layers[l]);
    cache.outputs.push_back(x);
  }
}

}  // namespace

std::vector<MatrixXd> ToyModel::hidden_states(std::span<const int> ids, std::span<const int> segments) const {
  if (ids.empty() || ids.size() != segments.size()) throw InputError("invalid encoder input");
  if (ids.size() > dims_.max_positions) throw InputError("sequence longer than the position table");
  ForwardCache cache;
  forward(params_, ids, segments, cache);
  return std::move(cache.outputs);
}

MatrixXd ToyModel::mlm_logits(const MatrixXd& top, std::span<const std::size_t> positions) const {
  MatrixXd rows(static_cast<Index>(positions.size()), top.cols());
  for (std::size_t i = 0; i < positions.size(); ++i) rows.row(static_cast<Index>(i)) = top.row(static_cast<Index>(positions[i]));
  return (rows * params_.tok.transpose()).rowwise() + params_.mlm_bias.row(0);
}

double ToyModel::loss(const TrainingInstance& instance, double mlm_scale, double nsp_scale, ModelParams* grad) const {
  check_instance(instance, dims_);
  const ModelParams& p = params_;
  ForwardCache cache;
  forward(p, instance.ids, instance.segments, cache);
  const MatrixXd& top = cache.outputs.back();
  MatrixXd dtop = MatrixXd::Zero(top.rows(), top.cols());
  double total = 0.0;

  if (!instance.mlm_positions.empty()) {
    MatrixXd probs = mlm_logits(top, instance.mlm_positions);
    softmax_rows(probs);
    for (std::size_t i = 0; i < instance.mlm_positions.size(); ++i) {
      const auto r = static_cast<Index>(i);
      const auto label = instance.mlm_labels[i];
      total -= mlm_scale * std::log(std::max(probs(r, label), 1e-300));
      probs(r, label) -= 1.0;
    }
    if (grad != nullptr) {
      const MatrixXd dlogits = probs * mlm_scale;
      MatrixXd rows(dlogits.rows(), top.cols());
      for (std::size_t i = 0; i < instance.mlm_positions.size(); ++i) {
        rows.row(static_cast<Index>(i)) = top.row(static_cast<Index>(instance.mlm_positions[i]));
      }
      grad->tok.noalias() += dlogits.transpose() * rows;
      grad->mlm_bias += dlogits.colwise().sum();
      const MatrixXd drows = dlogits * p.tok;
      for (std::size_t i = 0; i < instance.mlm_positions.size(); ++i) {
        dtop.row(static_cast<Index>(instance.mlm_positions[i])) += drows.row(static_cast<Index>(i));
      }
    }
  }

  if (instance.has_nsp) {
    MatrixXd probs = (top.row(0) * p.nsp_w) + p.nsp_b;
    softmax_rows(probs);
    const int label = instance.is_next ? 1 : 0;
    total -= nsp_scale * std::log(std::max(probs(0, label), 1e-300));
    if (grad != nullptr) {
      probs(0, label) -= 1.0;
      const MatrixXd dl = probs * nsp_scale;
      grad->nsp_w.noalias() += top.row(0).transpose() * dl;
      grad->nsp_b += dl;
      dtop.row(0) += dl * p.nsp_w.transpose();
    }
  }

  if (grad == nullptr) return total;

  MatrixXd dx = dtop;
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    dx = layer_backward(p.layers[l], cache.layers[l], dx, grad->layers[l]);
  }
  const MatrixXd de = layer_norm_backward(dx, cache.emb_ln, p.emb_ln_g, grad->emb_ln_g, grad->emb_ln_b);
  for (Index i = 0; i < de.rows(); ++i) {
    grad->tok.row(instance.ids[static_cast<std::size_t>(i)]) += de.row(i);
    grad->pos.row(i) += de.row(i);
    grad->seg.row(instance.segments[static_cast<std::size_t>(i)]) += de.row(i);
  }
  return total;
}

ToyEncoder::ToyEncoder(const Checkpoint& checkpoint)
    : config_(checkpoint.config()),
      vocab_(checkpoint.vocab()),
      model_(checkpoint),
      id_(checkpoint.digest()) {
  if (config_.max_seq_length > model_.dims().max_positions) {
    throw MismatchError("max_seq_length exceeds the checkpoint's position table");
  }
}

HiddenStates ToyEncoder::encode(std::span<const std::string> words) const {
  const SegmentedSequence seq = segment_words(vocab_, words, config_.max_seq_length);
  std::vector<int> ids;
  ids.reserve(seq.subtokens.size());
  for (const auto& s : seq.subtokens) ids.push_back(s.id);
  const std::vector<int> segments(ids.size(), 0);
  HiddenStates states;
  states.layers = model_.hidden_states(ids, segments);
  states.token_spans = seq.token_spans;
  return states;
}

}  // namespace histsem
