#ifndef HISTSEM_TOY_MODEL_HPP_
#define HISTSEM_TOY_MODEL_HPP_

// A small BERT-style encoder (token + position + segment embeddings, post-LN
// single-head self-attention blocks with a ReLU feed-forward layer) with
// hand-written backpropagation for the masked-LM and next-sentence heads.
// The MLM decoder is tied to the token embedding table.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "histsem/checkpoint.hpp"
#include "histsem/encoder.hpp"
#include "histsem/vocab.hpp"

namespace histsem {

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t max_positions = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_layers = 0;
  std::size_t ffn_dim = 0;
};

struct LayerParams {
  Eigen::MatrixXd wq, bq, wk, bk, wv, bv, wo, bo;
  Eigen::MatrixXd ln1_g, ln1_b;
  Eigen::MatrixXd w1, b1, w2, b2;
  Eigen::MatrixXd ln2_g, ln2_b;

  template <typename Self, typename Fn>
  static void visit(Self& self, const std::string& prefix, Fn&& fn) {
    fn(prefix + "attention.query.weight", self.wq);
    fn(prefix + "attention.query.bias", self.bq);
    fn(prefix + "attention.key.weight", self.wk);
    fn(prefix + "attention.key.bias", self.bk);
    fn(prefix + "attention.value.weight", self.wv);
    fn(prefix + "attention.value.bias", self.bv);
    fn(prefix + "attention.output.weight", self.wo);
    fn(prefix + "attention.output.bias", self.bo);
    fn(prefix + "attention.norm.gamma", self.ln1_g);
    fn(prefix + "attention.norm.beta", self.ln1_b);
    fn(prefix + "ffn.intermediate.weight", self.w1);
    fn(prefix + "ffn.intermediate.bias", self.b1);
    fn(prefix + "ffn.output.weight", self.w2);
    fn(prefix + "ffn.output.bias", self.b2);
    fn(prefix + "ffn.norm.gamma", self.ln2_g);
    fn(prefix + "ffn.norm.beta", self.ln2_b);
  }
};

struct ModelParams {
  Eigen::MatrixXd tok, pos, seg;
  Eigen::MatrixXd emb_ln_g, emb_ln_b;
  std::vector<LayerParams> layers;
  Eigen::MatrixXd mlm_bias;
  Eigen::MatrixXd nsp_w, nsp_b;

  // Visits every tensor in serialization order as fn(name, matrix).
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn) {
    fn("embeddings.token", self.tok);
    fn("embeddings.position", self.pos);
    fn("embeddings.segment", self.seg);
    fn("embeddings.norm.gamma", self.emb_ln_g);
    fn("embeddings.norm.beta", self.emb_ln_b);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      LayerParams::visit(self.layers[l], "layer." + std::to_string(l) + ".", fn);
    }
    fn("mlm.bias", self.mlm_bias);
    fn("nsp.weight", self.nsp_w);
    fn("nsp.bias", self.nsp_b);
  }

  std::vector<Eigen::MatrixXd*> tensors();
  std::vector<const Eigen::MatrixXd*> tensors() const;

  ModelParams zeros_like() const;
  void set_zero();
  double squared_norm() const;
  // this += alpha * other
  void add_scaled(const ModelParams& other, double alpha);
};

// A masked-LM / NSP training example. Positions index into `ids`.
struct TrainingInstance {
  std::vector<int> ids;
  std::vector<int> segments;
  std::vector<std::size_t> mlm_positions;
  std::vector<int> mlm_labels;
  bool has_nsp = false;
  bool is_next = false;
};

class ToyModel {
 public:
  // Fresh weights: N(0, 0.02^2) matrices, unit norm gains, zero biases.
  ToyModel(const ModelDims& dims, std::uint64_t seed);
  // Weights from a toy checkpoint's float32 blocks.
  explicit ToyModel(const Checkpoint& checkpoint);

  const ModelDims& dims() const { return dims_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  std::vector<ParamBlock> to_blocks() const;

  // Output of every transformer layer (rows = positions).
  std::vector<Eigen::MatrixXd> hidden_states(std::span<const int> ids, std::span<const int> segments) const;

  // mlm_scale * sum of masked-token cross-entropies + nsp_scale * NSP
  // cross-entropy. Gradients are accumulated into *grad when non-null.
  double loss(const TrainingInstance& instance, double mlm_scale, double nsp_scale, ModelParams* grad) const;

  // Vocabulary logits for the given rows of the top layer.
  Eigen::MatrixXd mlm_logits(const Eigen::MatrixXd& top, std::span<const std::size_t> positions) const;

 private:
  ModelDims dims_;
  ModelParams params_;
};

class ToyEncoder : public Encoder {
 public:
  explicit ToyEncoder(const Checkpoint& checkpoint);

  HiddenStates encode(std::span<const std::string> words) const override;
  const EncoderConfig& config() const override { return config_; }
  const std::string& id() const override { return id_; }

  const ToyModel& model() const { return model_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  EncoderConfig config_;
  Vocabulary vocab_;
  ToyModel model_;
  std::string id_;
};

}  // namespace histsem

#endif  // HISTSEM_TOY_MODEL_HPP_
