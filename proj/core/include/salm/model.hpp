#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "salm/vocabulary.hpp"

namespace salm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 2;
  std::size_t n_layers = 2;
  std::size_t d_ff = 128;
  std::size_t max_seq_len = 256;
  std::uint64_t seed = 0;

  /// Throws ConfigError on zero sizes or when n_heads does not divide d_model.
  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Pre-norm transformer block weights. Vectors are stored as 1 x n matrices.
struct LayerParameters {
  Matrix ln1_gain, ln1_bias;
  Matrix wq, wk, wv, wo;
  Matrix ln2_gain, ln2_bias;
  Matrix ff_in, ff_in_bias;
  Matrix ff_out, ff_out_bias;
};

/// All trainable tensors of the decoder. Gradients and optimizer moments
/// share this type.
struct Parameters {
  Matrix token_embedding;       // vocab x d_model
  Matrix positional_embedding;  // max_seq_len x d_model
  std::vector<LayerParameters> layers;
  Matrix final_ln_gain, final_ln_bias;
  Matrix output_projection;  // d_model x vocab
  Matrix output_bias;        // 1 x vocab

  /// Every tensor with a stable dotted name, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;

  std::size_t parameter_count() const;
  /// Throws ShapeError when any tensor disagrees with `config`.
  void check_shapes(const ModelConfig& config) const;
  bool all_finite() const;

  void set_zero();
  /// this += scale * other, tensor by tensor. Throws ShapeError on mismatch.
  void add_scaled(const Parameters& other, double scale);
  void scale(double factor);

  static Parameters zeros(const ModelConfig& config);

  friend bool operator==(const Parameters& a, const Parameters& b);
};

/// Deterministic in `config.seed`: weights ~ N(0, 1/d_model), layer-norm
/// gains 1, every bias 0.
Parameters init_parameters(const ModelConfig& config);

struct LayerNormCache {
  Matrix normalized;          // (x - mean) / std
  Eigen::VectorXd inv_std;    // one entry per row
};

struct LayerCache {
  Matrix input;
  LayerNormCache ln1;
  Matrix attn_in, q, k, v;
  std::vector<Matrix> attention;  // per head, causal softmax weights
  Matrix heads;                   // concatenated head outputs
  Matrix residual;                // input + attention output
  LayerNormCache ln2;
  Matrix ff_in, ff_pre, ff_act;
};

/// Activations kept by forward() for an exact backward pass.
struct ForwardTrace {
  std::vector<TokenId> tokens;
  std::vector<LayerCache> layers;
  LayerNormCache final_ln;
  Matrix hidden;  // seq_len x d_model, row t = h_t
};

struct ForwardResult {
  Matrix logits;  // seq_len x vocab
  ForwardTrace trace;
};

/// Causal forward pass. Throws LengthError for empty or overlong input and
/// IndexError for out-of-range ids.
ForwardResult forward(const ModelConfig& config, const Parameters& params,
                      std::span<const TokenId> tokens);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
/// Throws ShapeError when the trace, gradient or parameters disagree.
void backward(const ModelConfig& config, const Parameters& params, const ForwardTrace& trace,
              const Matrix& logits_grad, Parameters& grads);

/// Convenience wrapper returning a fresh gradient.
Parameters backward(const ModelConfig& config, const Parameters& params,
                    const ForwardTrace& trace, const Matrix& logits_grad);

/// Row-wise log-softmax with max subtraction.
Matrix log_softmax_rows(const Matrix& logits);

/// Model input for scoring `response` after `context`: BOS ++ context ++
/// response[:-1].
std::vector<TokenId> teacher_forced_input(std::span<const TokenId> context,
                                          std::span<const TokenId> response);

/// Teacher-forced log P(response | context) = sum_t log P(y_t | y_<t, X).
/// Throws LengthError for an empty response or one that does not end in EOS.
double sequence_log_prob(const ModelConfig& config, const Parameters& params,
                         std::span<const TokenId> context, std::span<const TokenId> response);

enum class DecodeMode { kGreedy, kSample };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kGreedy;
  std::size_t max_len = 32;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// Generates token by token after BOS ++ context. Stops after the first EOS
/// (which is included), at `max_len` tokens, or when the model's position
/// table is exhausted. Greedy ties go to the lowest id.
std::vector<TokenId> decode(const ModelConfig& config, const Parameters& params,
                            std::span<const TokenId> context, const DecodeOptions& options);

}  // namespace salm
