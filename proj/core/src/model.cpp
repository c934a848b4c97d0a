#include "salm/model.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>

#include "salm/error.hpp"

namespace salm {

namespace {

constexpr double kLayerNormEps = 1e-5;

void check(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

Matrix zeros(std::size_t r, std::size_t c) {
  return Matrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

template <typename P, typename Out>
void collect_tensors(P& p, Out& out) {
  out.emplace_back("token_embedding", &p.token_embedding);
  out.emplace_back("positional_embedding", &p.positional_embedding);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layers." + std::to_string(i) + ".";
    out.emplace_back(pre + "ln1_gain", &l.ln1_gain);
    out.emplace_back(pre + "ln1_bias", &l.ln1_bias);
    out.emplace_back(pre + "wq", &l.wq);
    out.emplace_back(pre + "wk", &l.wk);
    out.emplace_back(pre + "wv", &l.wv);
    out.emplace_back(pre + "wo", &l.wo);
    out.emplace_back(pre + "ln2_gain", &l.ln2_gain);
    out.emplace_back(pre + "ln2_bias", &l.ln2_bias);
    out.emplace_back(pre + "ff_in", &l.ff_in);
    out.emplace_back(pre + "ff_in_bias", &l.ff_in_bias);
    out.emplace_back(pre + "ff_out", &l.ff_out);
    out.emplace_back(pre + "ff_out_bias", &l.ff_out_bias);
  }
  out.emplace_back("final_ln_gain", &p.final_ln_gain);
  out.emplace_back("final_ln_bias", &p.final_ln_bias);
  out.emplace_back("output_projection", &p.output_projection);
  out.emplace_back("output_bias", &p.output_bias);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache) {
  const auto rows = x.rows();
  const double d = static_cast<double>(x.cols());
  cache.normalized.resize(rows, x.cols());
  cache.inv_std.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).sum() / d;
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv;
    cache.normalized.row(r) = centered * inv;
  }
  Matrix y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gain,
                           Matrix& dgain, Matrix& dbias) {
  const auto& xhat = cache.normalized;
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double sum = dxhat.row(r).sum();
    const double dot = dxhat.row(r).dot(xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / d) *
                (d * dxhat.row(r).array() - sum - xhat.row(r).array() * dot).matrix();
  }
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

/// Lower-triangular softmax of each row of `scores`; entries above the
/// diagonal are zero.
void causal_softmax(Matrix& scores) {
  const auto n = scores.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = scores.row(i);
    const double mx = row.head(i + 1).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      row(j) = std::exp(row(j) - mx);
      sum += row(j);
    }
    row.head(i + 1) /= sum;
    row.tail(n - i - 1).setZero();
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0 ||
      max_seq_len == 0)
    throw ConfigError("model dimensions must all be positive");
  if (d_model % n_heads != 0)
    throw ConfigError("n_heads (" + std::to_string(n_heads) + ") must divide d_model (" +
                      std::to_string(d_model) + ")");
}

std::vector<std::pair<std::string, Matrix*>> Parameters::tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  collect_tensors(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> Parameters::tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  collect_tensors(*this, out);
  return out;
}

std::size_t Parameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

void Parameters::check_shapes(const ModelConfig& c) const {
  const Parameters expected = zeros(c);
  const auto want = expected.tensors();
  const auto have = tensors();
  check(want.size() == have.size(), "parameter tensor count does not match the model config");
  for (std::size_t i = 0; i < want.size(); ++i) {
    check(want[i].second->rows() == have[i].second->rows() &&
              want[i].second->cols() == have[i].second->cols(),
          "tensor " + have[i].first + " has shape " + std::to_string(have[i].second->rows()) +
              "x" + std::to_string(have[i].second->cols()) + ", expected " +
              std::to_string(want[i].second->rows()) + "x" +
              std::to_string(want[i].second->cols()));
  }
}

bool Parameters::all_finite() const {
  for (const auto& [name, t] : tensors())
    if (!t->allFinite()) return false;
  return true;
}

void Parameters::set_zero() {
  for (auto& [name, t] : tensors()) t->setZero();
}

void Parameters::add_scaled(const Parameters& other, double scale) {
  auto mine = tensors();
  const auto theirs = other.tensors();
  check(mine.size() == theirs.size(), "parameter sets differ in tensor count");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    check(mine[i].second->rows() == theirs[i].second->rows() &&
              mine[i].second->cols() == theirs[i].second->cols(),
          "tensor " + mine[i].first + " shape mismatch");
    *mine[i].second += scale * *theirs[i].second;
  }
}

void Parameters::scale(double factor) {
  for (auto& [name, t] : tensors()) *t *= factor;
}

Parameters Parameters::zeros(const ModelConfig& c) {
  c.validate();
  Parameters p;
  p.token_embedding = salm::zeros(c.vocab_size, c.d_model);
  p.positional_embedding = salm::zeros(c.max_seq_len, c.d_model);
  p.layers.resize(c.n_layers);
  for (auto& l : p.layers) {
    l.ln1_gain = salm::zeros(1, c.d_model);
    l.ln1_bias = salm::zeros(1, c.d_model);
    l.wq = salm::zeros(c.d_model, c.d_model);
    l.wk = salm::zeros(c.d_model, c.d_model);
    l.wv = salm::zeros(c.d_model, c.d_model);
    l.wo = salm::zeros(c.d_model, c.d_model);
    l.ln2_gain = salm::zeros(1, c.d_model);
    l.ln2_bias = salm::zeros(1, c.d_model);
    l.ff_in = salm::zeros(c.d_model, c.d_ff);
    l.ff_in_bias = salm::zeros(1, c.d_ff);
    l.ff_out = salm::zeros(c.d_ff, c.d_model);
    l.ff_out_bias = salm::zeros(1, c.d_model);
  }
  p.final_ln_gain = salm::zeros(1, c.d_model);
  p.final_ln_bias = salm::zeros(1, c.d_model);
  p.output_projection = salm::zeros(c.d_model, c.vocab_size);
  p.output_bias = salm::zeros(1, c.vocab_size);
  return p;
}

bool operator==(const Parameters& a, const Parameters& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const Matrix& x = *ta[i].second;
    const Matrix& y = *tb[i].second;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    // bitwise: distinguishes -0.0 from 0.0 and compares NaN payloads
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0)
      return false;
  }
  return true;
}

Parameters init_parameters(const ModelConfig& config) {
  Parameters p = Parameters::zeros(config);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.d_model)));
  for (auto& [name, t] : p.tensors()) {
    if (ends_with(name, "_gain")) {
      t->setOnes();
    } else if (ends_with(name, "bias")) {
      t->setZero();
    } else {
      for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = normal(rng);
    }
  }
  return p;
}

ForwardResult forward(const ModelConfig& config, const Parameters& params,
                      std::span<const TokenId> tokens) {
  const std::size_t n = tokens.size();
  if (n == 0) throw LengthError("forward needs at least one token");
  if (n > config.max_seq_len)
    throw LengthError("sequence of " + std::to_string(n) + " tokens exceeds max_seq_len " +
                      std::to_string(config.max_seq_len));
  for (TokenId id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size)
      throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(config.vocab_size));
  }

  const auto T = static_cast<Eigen::Index>(n);
  const auto dh = static_cast<Eigen::Index>(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardResult result;
  ForwardTrace& trace = result.trace;
  trace.tokens.assign(tokens.begin(), tokens.end());
  trace.layers.resize(config.n_layers);

  Matrix x(T, static_cast<Eigen::Index>(config.d_model));
  for (Eigen::Index t = 0; t < T; ++t)
    x.row(t) = params.token_embedding.row(tokens[static_cast<std::size_t>(t)]) +
               params.positional_embedding.row(t);

  for (std::size_t li = 0; li < config.n_layers; ++li) {
    const auto& w = params.layers[li];
    auto& c = trace.layers[li];
    c.input = x;
    c.attn_in = layer_norm(x, w.ln1_gain, w.ln1_bias, c.ln1);
    c.q = c.attn_in * w.wq;
    c.k = c.attn_in * w.wk;
    c.v = c.attn_in * w.wv;
    c.heads.resize(T, x.cols());
    c.attention.resize(config.n_heads);
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      Matrix scores = (c.q.middleCols(off, dh) * c.k.middleCols(off, dh).transpose()) * scale;
      causal_softmax(scores);
      c.heads.middleCols(off, dh) = scores * c.v.middleCols(off, dh);
      c.attention[h] = std::move(scores);
    }
    x += c.heads * w.wo;
    c.residual = x;
    c.ff_in = layer_norm(x, w.ln2_gain, w.ln2_bias, c.ln2);
    c.ff_pre = c.ff_in * w.ff_in;
    c.ff_pre.rowwise() += w.ff_in_bias.row(0);
    c.ff_act = c.ff_pre.unaryExpr([](double v) { return gelu(v); });
    x += c.ff_act * w.ff_out;
    x.rowwise() += w.ff_out_bias.row(0);
  }

  trace.hidden = layer_norm(x, params.final_ln_gain, params.final_ln_bias, trace.final_ln);
  result.logits = trace.hidden * params.output_projection;
  result.logits.rowwise() += params.output_bias.row(0);
  return result;
}

void backward(const ModelConfig& config, const Parameters& params, const ForwardTrace& trace,
              const Matrix& logits_grad, Parameters& grads) {
  const auto T = static_cast<Eigen::Index>(trace.tokens.size());
  check(T > 0 && trace.layers.size() == config.n_layers && params.layers.size() == config.n_layers &&
            grads.layers.size() == config.n_layers,
        "trace, parameters and gradients disagree on layer count");
  check(trace.hidden.rows() == T && trace.hidden.cols() == static_cast<Eigen::Index>(config.d_model),
        "trace hidden states do not match the model config");
  check(logits_grad.rows() == T && logits_grad.cols() == static_cast<Eigen::Index>(config.vocab_size),
        "logits gradient must be seq_len x vocab_size");
  check(params.output_projection.rows() == static_cast<Eigen::Index>(config.d_model) &&
            params.output_projection.cols() == static_cast<Eigen::Index>(config.vocab_size) &&
            grads.output_projection.rows() == params.output_projection.rows() &&
            grads.output_projection.cols() == params.output_projection.cols(),
        "output projection shape mismatch");

  const auto dh = static_cast<Eigen::Index>(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  grads.output_projection.noalias() += trace.hidden.transpose() * logits_grad;
  grads.output_bias.row(0) += logits_grad.colwise().sum();
  Matrix dx = logits_grad * params.output_projection.transpose();
  dx = layer_norm_backward(dx, trace.final_ln, params.final_ln_gain, grads.final_ln_gain,
                           grads.final_ln_bias);

  for (std::size_t li = config.n_layers; li-- > 0;) {
    const auto& w = params.layers[li];
    auto& g = grads.layers[li];
    const auto& c = trace.layers[li];

    // feed-forward branch
    g.ff_out.noalias() += c.ff_act.transpose() * dx;
    g.ff_out_bias.row(0) += dx.colwise().sum();
    Matrix dpre = dx * w.ff_out.transpose();
    dpre.array() *= c.ff_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    g.ff_in.noalias() += c.ff_in.transpose() * dpre;
    g.ff_in_bias.row(0) += dpre.colwise().sum();
    Matrix dresidual = dx + layer_norm_backward(dpre * w.ff_in.transpose(), c.ln2, w.ln2_gain,
                                                g.ln2_gain, g.ln2_bias);

    // attention branch
    g.wo.noalias() += c.heads.transpose() * dresidual;
    const Matrix dheads = dresidual * w.wo.transpose();
    Matrix dq(T, dheads.cols()), dk(T, dheads.cols()), dv(T, dheads.cols());
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      const Matrix& p = c.attention[h];
      const auto dout = dheads.middleCols(off, dh);
      const Matrix dp = dout * c.v.middleCols(off, dh).transpose();
      dv.middleCols(off, dh) = p.transpose() * dout;
      const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
      const Matrix ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix() * scale;
      dq.middleCols(off, dh) = ds * c.k.middleCols(off, dh);
      dk.middleCols(off, dh) = ds.transpose() * c.q.middleCols(off, dh);
    }
    g.wq.noalias() += c.attn_in.transpose() * dq;
    g.wk.noalias() += c.attn_in.transpose() * dk;
    g.wv.noalias() += c.attn_in.transpose() * dv;
    Matrix dattn_in = dq * w.wq.transpose();
    dattn_in.noalias() += dk * w.wk.transpose();
    dattn_in.noalias() += dv * w.wv.transpose();
    dx = dresidual + layer_norm_backward(dattn_in, c.ln1, w.ln1_gain, g.ln1_gain, g.ln1_bias);
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    grads.token_embedding.row(trace.tokens[static_cast<std::size_t>(t)]) += dx.row(t);
    grads.positional_embedding.row(t) += dx.row(t);
  }
}

Parameters backward(const ModelConfig& config, const Parameters& params,
                    const ForwardTrace& trace, const Matrix& logits_grad) {
  Parameters grads = Parameters::zeros(config);
  backward(config, params, trace, logits_grad, grads);
  return grads;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const auto shifted = logits.row(r).array() - mx;
    out.row(r) = shifted - std::log(shifted.exp().sum());
  }
  return out;
}

std::vector<TokenId> teacher_forced_input(std::span<const TokenId> context,
                                          std::span<const TokenId> response) {
  std::vector<TokenId> input;
  input.reserve(1 + context.size() + response.size());
  input.push_back(Vocabulary::kBos);
  input.insert(input.end(), context.begin(), context.end());
  if (!response.empty()) input.insert(input.end(), response.begin(), response.end() - 1);
  return input;
}

double sequence_log_prob(const ModelConfig& config, const Parameters& params,
                         std::span<const TokenId> context, std::span<const TokenId> response) {
  if (response.empty()) throw LengthError("response must not be empty");
  if (response.back() != Vocabulary::kEos) throw LengthError("response must end with EOS");
  const auto input = teacher_forced_input(context, response);
  const auto fwd = forward(config, params, input);
  const Matrix logp = log_softmax_rows(fwd.logits);
  double total = 0.0;
  for (std::size_t j = 0; j < response.size(); ++j)
    total += logp(static_cast<Eigen::Index>(context.size() + j), response[j]);
  return total;
}

std::vector<TokenId> decode(const ModelConfig& config, const Parameters& params,
                            std::span<const TokenId> context, const DecodeOptions& options) {
  if (options.max_len == 0) throw ConfigError("max_len must be at least 1");
  if (options.mode == DecodeMode::kSample && !(options.temperature > 0.0))
    throw ConfigError("sampling temperature must be positive");
  std::mt19937_64 rng(options.seed);
  std::vector<TokenId> sequence;
  sequence.push_back(Vocabulary::kBos);
  sequence.insert(sequence.end(), context.begin(), context.end());

  std::vector<TokenId> out;
  while (out.size() < options.max_len && sequence.size() <= config.max_seq_len) {
    const auto fwd = forward(config, params, sequence);
    const auto last = fwd.logits.row(fwd.logits.rows() - 1);
    TokenId next = 0;
    if (options.mode == DecodeMode::kGreedy) {
      for (Eigen::Index i = 1; i < last.size(); ++i)
        if (last(i) > last(next)) next = static_cast<TokenId>(i);
    } else {
      const Eigen::RowVectorXd scaled = last / options.temperature;
      const Eigen::RowVectorXd probs = (scaled.array() - scaled.maxCoeff()).exp().matrix();
      double u = std::uniform_real_distribution<double>(0.0, probs.sum())(rng);
      next = static_cast<TokenId>(probs.size() - 1);
      for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (u < probs(i)) {
          next = static_cast<TokenId>(i);
          break;
        }
        u -= probs(i);
      }
    }
    out.push_back(next);
    if (next == Vocabulary::kEos) break;
    sequence.push_back(next);
  }
  return out;
}

}  // namespace salm
