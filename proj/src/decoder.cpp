#include "raac/decoder.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "raac/errors.h"
#include "raac/rng.h"

namespace raac {

namespace {

constexpr double kLnEps = 1e-5;

// Base-init scales. The copy-init constants are calibrated so that the
// frozen base echoes prompt unigrams and copies repeated bigrams (a crude
// stand-in for a pretrained language model's behavior); see the induction
// tests for the empirical check.
constexpr double kPlainEmbScale = 0.08;
constexpr double kPlainOutScale = 0.6;
constexpr double kPlainPosScale = 0.02;
constexpr double kPlainWeightScale = 0.02;

constexpr double kEmbScale = 0.3;
constexpr double kQKScale = 0.02;
constexpr double kValueGain = 0.12;
constexpr double kFfnScale = 0.04;
constexpr double kPrevGain = 0.8;
constexpr double kPrevValueGain = 1.5;
constexpr double kInductionQGain = 2.5;
constexpr double kInductionKGain = 1.0;
constexpr double kInductionValueGain = 4.0;
constexpr double kCrossScale = 0.02;

struct Partition {
  // copy-init splits the residual stream into a positional slice, an
  // embedding slice (readout space) and a scratch slice used as the
  // previous-token buffer.
  int pos_begin = 0, pos_end = 0;
  int emb_begin = 0, emb_end = 0;
  int scratch_begin = 0, scratch_end = 0;

  int pos_dims() const { return pos_end - pos_begin; }
  int emb_dims() const { return emb_end - emb_begin; }
  int scratch_dims() const { return scratch_end - scratch_begin; }
};

Partition make_partition(int d_model) {
  Partition p;
  p.pos_begin = 0;
  p.pos_end = d_model / 4;
  p.emb_begin = p.pos_end;
  p.emb_end = p.pos_end + (3 * d_model) / 8;
  p.scratch_begin = p.emb_end;
  p.scratch_end = d_model;
  return p;
}

// Structured init needs room for the stream partition; tiny models fall
// back to a plain random base.
bool structured_enabled(const DecoderConfig& cfg) {
  return cfg.copy_init && cfg.d_model % 8 == 0 && cfg.d_model >= 16;
}

bool circuits_enabled(const DecoderConfig& cfg) {
  if (!structured_enabled(cfg)) return false;
  if (cfg.n_layers < 2 || cfg.n_heads < 2) return false;
  const int dk = cfg.d_model / cfg.n_heads;
  const Partition p = make_partition(cfg.d_model);
  return dk >= 4 && dk % 2 == 0 && dk <= p.scratch_dims() && dk <= p.emb_dims();
}

Eigen::MatrixXd randn(NormalSampler& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.next();
  }
  return m;
}

// Thin Q factor: `cols` orthonormal columns in `rows` dimensions.
Eigen::MatrixXd orthonormal_cols(NormalSampler& rng, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::MatrixXd a = randn(rng, rows, cols, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  return q;
}

constexpr double kInvSqrt2 = 0.70710678118654752;

double gelu(double z) {
  return 0.5 * z * (1.0 + std::erf(z * kInvSqrt2));
}

double gelu_grad(double z) {
  constexpr double inv_sqrt_2pi = 0.39894228040143268;
  return 0.5 * (1.0 + std::erf(z * kInvSqrt2)) + z * inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

struct LayerNormCache {
  Eigen::MatrixXd xhat;
  Eigen::VectorXd rstd;
};

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, LayerNormCache* cache) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  Eigen::MatrixXd y(rows, cols);
  Eigen::MatrixXd xhat(rows, cols);
  Eigen::VectorXd rstd(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double r = 1.0 / std::sqrt(var + kLnEps);
    rstd(i) = r;
    xhat.row(i) = ((x.row(i).array() - mean) * r).matrix();
    y.row(i) = xhat.row(i).cwiseProduct(gain.transpose()) + bias.transpose();
  }
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const LayerNormCache& cache,
                                    const Eigen::VectorXd& gain) {
  const Eigen::Index rows = dy.rows(), cols = dy.cols();
  Eigen::MatrixXd dx(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(gain.transpose());
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) =
        cache.rstd(i) * (dxhat.array() - m1 - cache.xhat.row(i).array() * m2).matrix();
  }
  return dx;
}

struct AttnCache {
  Eigen::MatrixXd q, k, v;               // projected, heads packed
  std::vector<Eigen::MatrixXd> probs;    // per head, queries x keys
  Eigen::MatrixXd concat;                // pre-output-projection
};

// Shared multi-head attention. `causal` restricts each query row i to key
// positions j <= i (requires square attention).
Eigen::MatrixXd attention_forward(const Eigen::MatrixXd& query_in, const Eigen::MatrixXd& kv_in,
                                  const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk,
                                  const Eigen::MatrixXd& wv, const Eigen::MatrixXd& wo,
                                  int heads, bool causal, AttnCache* cache) {
  const Eigen::Index t = query_in.rows();
  const Eigen::Index s = kv_in.rows();
  const Eigen::Index d = wq.cols();
  const Eigen::Index dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Eigen::MatrixXd q = query_in * wq;
  Eigen::MatrixXd k = kv_in * wk;
  Eigen::MatrixXd v = kv_in * wv;
  Eigen::MatrixXd concat(t, d);
  std::vector<Eigen::MatrixXd> probs(static_cast<std::size_t>(heads));

  for (int h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * dk, dk);
    const auto kh = k.middleCols(h * dk, dk);
    const auto vh = v.middleCols(h * dk, dk);
    Eigen::MatrixXd scores = qh * kh.transpose() * scale;  // t x s
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(t, s);
    for (Eigen::Index i = 0; i < t; ++i) {
      const Eigen::Index limit = causal ? i + 1 : s;
      double max_score = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < limit; ++j) max_score = std::max(max_score, scores(i, j));
      double sum = 0.0;
      for (Eigen::Index j = 0; j < limit; ++j) {
        const double e = std::exp(scores(i, j) - max_score);
        p(i, j) = e;
        sum += e;
      }
      for (Eigen::Index j = 0; j < limit; ++j) p(i, j) /= sum;
    }
    concat.middleCols(h * dk, dk) = p * vh;
    probs[static_cast<std::size_t>(h)] = std::move(p);
  }

  Eigen::MatrixXd out = concat * wo;
  if (cache != nullptr) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
  }
  return out;
}

// d(softmax) pull-back per head, then assembles dQ/dK/dV (heads packed).
void attention_backward_core(const Eigen::MatrixXd& d_concat, const AttnCache& cache, int heads,
                             Eigen::MatrixXd& dq, Eigen::MatrixXd& dk_out,
                             Eigen::MatrixXd& dv) {
  const Eigen::Index t = d_concat.rows();
  const Eigen::Index d = d_concat.cols();
  const Eigen::Index dk = d / heads;
  const Eigen::Index s = cache.k.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  dq.setZero(t, d);
  dk_out.setZero(s, d);
  dv.setZero(s, d);

  for (int h = 0; h < heads; ++h) {
    const auto dch = d_concat.middleCols(h * dk, dk);
    const auto kh = cache.k.middleCols(h * dk, dk);
    const auto qh = cache.q.middleCols(h * dk, dk);
    const auto vh = cache.v.middleCols(h * dk, dk);
    const Eigen::MatrixXd& p = cache.probs[static_cast<std::size_t>(h)];

    const Eigen::MatrixXd dprobs = dch * vh.transpose();           // t x s
    dv.middleCols(h * dk, dk) = p.transpose() * dch;               // s x dk
    Eigen::MatrixXd dscores(t, s);
    for (Eigen::Index i = 0; i < t; ++i) {
      const double row_dot = dprobs.row(i).cwiseProduct(p.row(i)).sum();
      dscores.row(i) = p.row(i).cwiseProduct(dprobs.row(i).array().matrix() -
                                             Eigen::RowVectorXd::Constant(s, row_dot));
    }
    dq.middleCols(h * dk, dk) = dscores * kh * scale;
    dk_out.middleCols(h * dk, dk) = dscores.transpose() * qh * scale;
  }
}

struct BlockCache {
  LayerNormCache ln1;
  AttnCache self_attn;
  Eigen::MatrixXd x_mid;       // after self-attention residual
  AttnCache cross_attn;
  Eigen::MatrixXd cross_out;   // pre-gate cross-attention output
  Eigen::MatrixXd x_post;      // after gated cross-attention residual
  LayerNormCache ln2;
  Eigen::MatrixXd ffn_pre;     // pre-activation
  Eigen::MatrixXd ffn_act;
};

struct ForwardCache {
  std::vector<BlockCache> blocks;
  LayerNormCache lnf;
  Eigen::MatrixXd final_norm;  // input rows to the output projection
  Eigen::MatrixXd logits;
};

void validate_forward_inputs(const TokenSeq& tokens, const HiddenStateSeq& hidden,
                             const DecoderParams& params, bool use_cross) {
  const DecoderConfig& cfg = params.config;
  if (tokens.ids.empty()) throw InvalidArgument("forward: empty token sequence");
  if (tokens.length() > cfg.max_len) {
    throw InvalidArgument("forward: sequence length " + std::to_string(tokens.length()) +
                          " exceeds max length " + std::to_string(cfg.max_len));
  }
  for (int id : tokens.ids) {
    if (id < 0 || id >= cfg.vocab_size) throw InvalidArgument("forward: token id out of range");
  }
  if (use_cross) {
    if (hidden.rows() < 1) throw InvalidArgument("forward: empty hidden state sequence");
    if (hidden.dim() != cfg.cross_dim) {
      throw InvalidArgument("forward: hidden dim " + std::to_string(hidden.dim()) +
                            " does not match configured cross dim " +
                            std::to_string(cfg.cross_dim));
    }
  }
}

Eigen::MatrixXd embed_tokens(const TokenSeq& tokens, const DecoderParams& params) {
  const Eigen::Index t = tokens.length();
  Eigen::MatrixXd x(t, params.config.d_model);
  for (Eigen::Index i = 0; i < t; ++i) {
    x.row(i) = params.token_embedding.row(tokens.ids[static_cast<std::size_t>(i)]) +
               params.pos_embedding.row(i);
  }
  return x;
}

Eigen::MatrixXd run_forward(const TokenSeq& tokens, const HiddenStateSeq& hidden,
                            const DecoderParams& params, bool use_cross, ForwardCache* cache) {
  validate_forward_inputs(tokens, hidden, params, use_cross);
  const DecoderConfig& cfg = params.config;
  if (cache != nullptr) cache->blocks.resize(params.blocks.size());

  Eigen::MatrixXd x = embed_tokens(tokens, params);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const BlockParams& block = params.blocks[b];
    BlockCache* bc = cache != nullptr ? &cache->blocks[b] : nullptr;

    LayerNormCache ln1_local;
    const Eigen::MatrixXd normed =
        layer_norm(x, block.ln1_gain, block.ln1_bias, bc != nullptr ? &bc->ln1 : &ln1_local);
    x += attention_forward(normed, normed, block.self_wq, block.self_wk, block.self_wv,
                           block.self_wo, cfg.n_heads, /*causal=*/true,
                           bc != nullptr ? &bc->self_attn : nullptr);
    if (bc != nullptr) bc->x_mid = x;

    const double gate_scale = std::tanh(block.gate);
    if (bc != nullptr) {
      // Training path always materializes the cross output (the gate's
      // gradient needs it even when tanh(gate) == 0).
      bc->cross_out = attention_forward(x, hidden.values, block.cross_wq, block.cross_wk,
                                        block.cross_wv, block.cross_wo, cfg.n_heads,
                                        /*causal=*/false, &bc->cross_attn);
      if (gate_scale != 0.0) x += gate_scale * bc->cross_out;
      bc->x_post = x;
    } else if (use_cross && gate_scale != 0.0) {
      x += gate_scale * attention_forward(x, hidden.values, block.cross_wq, block.cross_wk,
                                          block.cross_wv, block.cross_wo, cfg.n_heads,
                                          /*causal=*/false, nullptr);
    }

    LayerNormCache ln2_local;
    const Eigen::MatrixXd normed2 =
        layer_norm(x, block.ln2_gain, block.ln2_bias, bc != nullptr ? &bc->ln2 : &ln2_local);
    Eigen::MatrixXd pre = normed2 * block.ffn_w1;
    Eigen::MatrixXd act = pre.unaryExpr([](double z) { return gelu(z); });
    x += act * block.ffn_w2;
    if (bc != nullptr) {
      bc->ffn_pre = std::move(pre);
      bc->ffn_act = std::move(act);
    }
  }

  LayerNormCache lnf_local;
  const Eigen::MatrixXd final_norm =
      layer_norm(x, params.lnf_gain, params.lnf_bias, cache != nullptr ? &cache->lnf : &lnf_local);
  Eigen::MatrixXd logits = final_norm * params.output_proj;
  if (cache != nullptr) {
    cache->final_norm = final_norm;
    cache->logits = logits;
  }
  return logits;
}

int count_targets(const TokenSeq& target) {
  if (target.loss_mask.size() != target.ids.size()) {
    throw InvalidArgument("loss: mask length does not match token length");
  }
  if (!target.loss_mask.empty() && target.loss_mask[0] != 0) {
    throw InvalidArgument("loss: position 0 cannot be a target");
  }
  int count = 0;
  for (std::size_t t = 1; t < target.ids.size(); ++t) {
    if (target.loss_mask[t] != 0) ++count;
  }
  if (count == 0) throw InvalidArgument("loss: no unmasked target positions");
  return count;
}

double log_sum_exp(const Eigen::RowVectorXd& row) {
  const double m = row.maxCoeff();
  return m + std::log((row.array() - m).exp().sum());
}

}  // namespace

void validate(const DecoderConfig& config) {
  if (config.n_layers < 1) throw InvalidArgument("decoder needs at least one layer");
  if (config.d_model < 2 || config.n_heads < 1 || config.d_model % config.n_heads != 0) {
    throw InvalidArgument("d_model must be a positive multiple of n_heads");
  }
  if (config.d_ff < 1) throw InvalidArgument("d_ff must be positive");
  if (config.max_len < 2) throw InvalidArgument("max_len must be at least 2");
  if (config.vocab_size <= Vocabulary::kUnk) {
    throw InvalidArgument("vocab_size must cover the special tokens");
  }
  if (config.cross_dim < 1) throw InvalidArgument("cross_dim must be positive");
}

DecoderParams init_decoder_params(const DecoderConfig& config, std::uint64_t seed) {
  validate(config);
  NormalSampler rng(hash_combine(seed, "decoder-init"));
  const int d = config.d_model;
  const int heads = config.n_heads;
  const int dk = d / heads;
  const bool structured = structured_enabled(config);
  const bool circuits = circuits_enabled(config);
  const Partition part = make_partition(d);

  DecoderParams params;
  params.config = config;

  if (structured) {
    params.token_embedding = Eigen::MatrixXd::Zero(config.vocab_size, d);
    params.token_embedding.middleCols(part.emb_begin, part.emb_dims()) =
        randn(rng, config.vocab_size, part.emb_dims(), kEmbScale);

    params.pos_embedding = Eigen::MatrixXd::Zero(config.max_len, d);
    const int n_pairs = part.pos_dims() / 2;
    for (int p = 0; p < n_pairs; ++p) {
      const double exponent = n_pairs > 1 ? static_cast<double>(p) / (n_pairs - 1) : 0.0;
      const double omega = std::numbers::pi * std::pow(1.0 / 64.0, exponent);
      for (int t = 0; t < config.max_len; ++t) {
        params.pos_embedding(t, 2 * p) = std::sin(t * omega);
        params.pos_embedding(t, 2 * p + 1) = std::cos(t * omega);
      }
    }
  } else {
    params.token_embedding = randn(rng, config.vocab_size, d, kPlainEmbScale);
    params.pos_embedding = randn(rng, config.max_len, d, kPlainPosScale);
  }

  // Shared by the previous-token head (writer) and the induction head
  // (reader): an embedding-slice sketch and a scratch-slice buffer.
  Eigen::MatrixXd sketch_proj;   // d x dk, reads the embedding slice
  Eigen::MatrixXd scratch_basis; // d x dk, orthonormal columns in scratch rows
  if (circuits) {
    sketch_proj = Eigen::MatrixXd::Zero(d, dk);
    sketch_proj.middleRows(part.emb_begin, part.emb_dims()) =
        randn(rng, part.emb_dims(), dk, 1.0 / std::sqrt(static_cast<double>(part.emb_dims())));
    scratch_basis = Eigen::MatrixXd::Zero(d, dk);
    scratch_basis.middleRows(part.scratch_begin, part.scratch_dims()) =
        orthonormal_cols(rng, part.scratch_dims(), dk);
  }

  params.blocks.resize(static_cast<std::size_t>(config.n_layers));
  for (int layer = 0; layer < config.n_layers; ++layer) {
    BlockParams& block = params.blocks[static_cast<std::size_t>(layer)];
    block.ln1_gain = Eigen::VectorXd::Ones(d);
    block.ln1_bias = Eigen::VectorXd::Zero(d);
    block.ln2_gain = Eigen::VectorXd::Ones(d);
    block.ln2_bias = Eigen::VectorXd::Zero(d);

    if (structured) {
      block.self_wq = randn(rng, d, d, kQKScale);
      block.self_wk = randn(rng, d, d, kQKScale);
      // Value/output tiling over an orthonormal basis: the net value path
      // is kValueGain * identity, which transports prefix content (and so
      // the prompt bag of words) along near-uniform attention.
      const Eigen::MatrixXd basis = orthonormal_cols(rng, d, d);
      block.self_wv = basis * kValueGain;
      block.self_wo = basis.transpose();
    } else {
      block.self_wq = randn(rng, d, d, kPlainWeightScale);
      block.self_wk = randn(rng, d, d, kPlainWeightScale);
      block.self_wv = randn(rng, d, d, kPlainWeightScale);
      block.self_wo = randn(rng, d, d, kPlainWeightScale);
    }

    if (circuits && layer == 0) {
      // Head 0: attend to position i-1 via a one-step rotation of the
      // sinusoidal pairs, write the predecessor's embedding sketch into
      // the scratch buffer.
      const int n_sel = std::min(dk / 2, part.pos_dims() / 2);
      block.self_wq.middleCols(0, dk).setZero();
      block.self_wk.middleCols(0, dk).setZero();
      const int n_pairs = part.pos_dims() / 2;
      for (int m = 0; m < n_sel; ++m) {
        const double exponent = n_pairs > 1 ? static_cast<double>(m) / (n_pairs - 1) : 0.0;
        const double omega = std::numbers::pi * std::pow(1.0 / 64.0, exponent);
        const int row = 2 * m;
        block.self_wq(row, 2 * m) = kPrevGain * std::cos(omega);
        block.self_wq(row + 1, 2 * m) = -kPrevGain * std::sin(omega);
        block.self_wq(row, 2 * m + 1) = kPrevGain * std::sin(omega);
        block.self_wq(row + 1, 2 * m + 1) = kPrevGain * std::cos(omega);
        block.self_wk(row, 2 * m) = kPrevGain;
        block.self_wk(row + 1, 2 * m + 1) = kPrevGain;
      }
      block.self_wv.middleCols(0, dk) = sketch_proj * kPrevValueGain;
      block.self_wo.middleRows(0, dk) = scratch_basis.transpose();
    }
    if (circuits && layer == config.n_layers - 1) {
      // Head 1: match own token sketch against the scratch buffer (the
      // previous token at every position) and copy the matched position's
      // embedding content back into the readout slice.
      block.self_wq.middleCols(dk, dk) = sketch_proj * kInductionQGain;
      block.self_wk.middleCols(dk, dk) = scratch_basis * kInductionKGain;
      Eigen::MatrixXd emb_basis = Eigen::MatrixXd::Zero(d, dk);
      emb_basis.middleRows(part.emb_begin, part.emb_dims()) =
          orthonormal_cols(rng, part.emb_dims(), dk);
      block.self_wv.middleCols(dk, dk) = emb_basis * kInductionValueGain;
      block.self_wo.middleRows(dk, dk) = emb_basis.transpose();
    }

    const double ffn_scale = structured ? kFfnScale : kPlainWeightScale;
    block.ffn_w1 = randn(rng, d, config.d_ff, ffn_scale);
    block.ffn_w2 = randn(rng, config.d_ff, d, ffn_scale);

    const double cross_scale = structured ? kCrossScale : kPlainWeightScale;
    block.cross_wq = randn(rng, d, d, cross_scale);
    block.cross_wk = randn(rng, config.cross_dim, d, cross_scale);
    block.cross_wv = randn(rng, config.cross_dim, d, cross_scale);
    block.cross_wo = randn(rng, d, d, cross_scale);
    block.gate = config.gate_init;
  }

  params.lnf_gain = Eigen::VectorXd::Ones(d);
  params.lnf_bias = Eigen::VectorXd::Zero(d);
  if (config.tie_output) {
    params.output_proj = params.token_embedding.transpose();
  } else {
    params.output_proj = randn(rng, d, config.vocab_size, kPlainOutScale);
  }
  return params;
}

std::vector<ParamView> parameter_views(DecoderParams& params) {
  std::vector<ParamView> views;
  auto add = [&views](const std::string& name, ParamGroup group, Eigen::MatrixXd& m) {
    views.push_back({name, group, m.data(), m.size()});
  };
  auto add_vec = [&views](const std::string& name, ParamGroup group, Eigen::VectorXd& v) {
    views.push_back({name, group, v.data(), v.size()});
  };
  add("token_embedding", ParamGroup::kBase, params.token_embedding);
  add("pos_embedding", ParamGroup::kBase, params.pos_embedding);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    BlockParams& block = params.blocks[b];
    const std::string prefix = "block" + std::to_string(b) + ".";
    add_vec(prefix + "ln1_gain", ParamGroup::kBase, block.ln1_gain);
    add_vec(prefix + "ln1_bias", ParamGroup::kBase, block.ln1_bias);
    add(prefix + "self_wq", ParamGroup::kBase, block.self_wq);
    add(prefix + "self_wk", ParamGroup::kBase, block.self_wk);
    add(prefix + "self_wv", ParamGroup::kBase, block.self_wv);
    add(prefix + "self_wo", ParamGroup::kBase, block.self_wo);
    add(prefix + "cross_wq", ParamGroup::kCrossAttention, block.cross_wq);
    add(prefix + "cross_wk", ParamGroup::kCrossAttention, block.cross_wk);
    add(prefix + "cross_wv", ParamGroup::kCrossAttention, block.cross_wv);
    add(prefix + "cross_wo", ParamGroup::kCrossAttention, block.cross_wo);
    views.push_back({prefix + "gate", ParamGroup::kCrossAttention, &block.gate, 1});
    add_vec(prefix + "ln2_gain", ParamGroup::kBase, block.ln2_gain);
    add_vec(prefix + "ln2_bias", ParamGroup::kBase, block.ln2_bias);
    add(prefix + "ffn_w1", ParamGroup::kBase, block.ffn_w1);
    add(prefix + "ffn_w2", ParamGroup::kBase, block.ffn_w2);
  }
  add_vec("lnf_gain", ParamGroup::kBase, params.lnf_gain);
  add_vec("lnf_bias", ParamGroup::kBase, params.lnf_bias);
  add("output_proj", ParamGroup::kBase, params.output_proj);
  return views;
}

std::vector<FreezeMaskEntry> freeze_mask(const DecoderParams& params) {
  std::vector<FreezeMaskEntry> mask;
  auto& mutable_params = const_cast<DecoderParams&>(params);
  for (const ParamView& view : parameter_views(mutable_params)) {
    mask.push_back({view.name, view.group == ParamGroup::kCrossAttention});
  }
  return mask;
}

ParamCounts trainable_fraction(const DecoderParams& params) {
  ParamCounts counts;
  auto& mutable_params = const_cast<DecoderParams&>(params);
  for (const ParamView& view : parameter_views(mutable_params)) {
    if (view.group == ParamGroup::kCrossAttention) {
      counts.cross += view.size;
    } else {
      counts.base += view.size;
    }
  }
  counts.encoder_placeholder =
      static_cast<std::int64_t>(params.config.cross_dim) * params.config.cross_dim;
  return counts;
}

std::vector<ParamView> cross_attention_views(DecoderParams& params) {
  std::vector<ParamView> views;
  for (const ParamView& view : parameter_views(params)) {
    if (view.group == ParamGroup::kCrossAttention) views.push_back(view);
  }
  return views;
}

TokenSeq make_training_sequence(const std::vector<int>& prompt_ids,
                                const std::vector<int>& caption_ids) {
  TokenSeq seq;
  seq.ids.reserve(prompt_ids.size() + caption_ids.size() + 2);
  seq.ids.push_back(Vocabulary::kBos);
  seq.ids.insert(seq.ids.end(), prompt_ids.begin(), prompt_ids.end());
  const std::size_t caption_start = seq.ids.size();
  seq.ids.insert(seq.ids.end(), caption_ids.begin(), caption_ids.end());
  seq.ids.push_back(Vocabulary::kEos);
  seq.loss_mask.assign(seq.ids.size(), 0);
  for (std::size_t t = caption_start; t < seq.ids.size(); ++t) seq.loss_mask[t] = 1;
  return seq;
}

Eigen::MatrixXd forward(const TokenSeq& tokens, const HiddenStateSeq& hidden,
                        const DecoderParams& params, bool use_cross) {
  return run_forward(tokens, hidden, params, use_cross, nullptr);
}

double loss(const Eigen::MatrixXd& logits, const TokenSeq& target) {
  if (logits.rows() != target.length()) {
    throw InvalidArgument("loss: logits rows do not match target length");
  }
  const int count = count_targets(target);
  double total = 0.0;
  for (std::size_t t = 1; t < target.ids.size(); ++t) {
    if (target.loss_mask[t] == 0) continue;
    const Eigen::Index row = static_cast<Eigen::Index>(t) - 1;
    total += log_sum_exp(logits.row(row)) - logits(row, target.ids[t]);
  }
  return total / count;
}

GradResult grad(const TokenSeq& tokens, const HiddenStateSeq& hidden,
                const DecoderParams& params) {
  const DecoderConfig& cfg = params.config;
  ForwardCache cache;
  run_forward(tokens, hidden, params, /*use_cross=*/true, &cache);

  GradResult result;
  result.loss_value = loss(cache.logits, tokens);
  result.blocks.resize(params.blocks.size());

  const Eigen::Index t_len = tokens.length();
  const int count = count_targets(tokens);

  // d(loss)/d(logits): softmax minus one-hot on target rows.
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(t_len, cfg.vocab_size);
  for (std::size_t t = 1; t < tokens.ids.size(); ++t) {
    if (tokens.loss_mask[t] == 0) continue;
    const Eigen::Index row = static_cast<Eigen::Index>(t) - 1;
    const double lse = log_sum_exp(cache.logits.row(row));
    dlogits.row(row) = ((cache.logits.row(row).array() - lse).exp() / count).matrix();
    dlogits(row, tokens.ids[t]) -= 1.0 / count;
  }

  Eigen::MatrixXd dy = dlogits * params.output_proj.transpose();
  Eigen::MatrixXd dx = layer_norm_backward(dy, cache.lnf, params.lnf_gain);

  for (std::size_t b = params.blocks.size(); b-- > 0;) {
    const BlockParams& block = params.blocks[b];
    const BlockCache& bc = cache.blocks[b];
    BlockGrads& grads = result.blocks[b];

    // Feed-forward sub-layer.
    {
      const Eigen::MatrixXd d_act = dx * block.ffn_w2.transpose();
      const Eigen::MatrixXd d_pre =
          d_act.cwiseProduct(bc.ffn_pre.unaryExpr([](double z) { return gelu_grad(z); }));
      const Eigen::MatrixXd d_norm2 = d_pre * block.ffn_w1.transpose();
      dx += layer_norm_backward(d_norm2, bc.ln2, block.ln2_gain);
    }

    // Gated cross-attention sub-layer.
    {
      const double gate_scale = std::tanh(block.gate);
      grads.gate = (1.0 - gate_scale * gate_scale) * dx.cwiseProduct(bc.cross_out).sum();

      const Eigen::MatrixXd d_cross_out = gate_scale * dx;
      const Eigen::MatrixXd d_concat = d_cross_out * block.cross_wo.transpose();
      grads.cross_wo = bc.cross_attn.concat.transpose() * d_cross_out;

      Eigen::MatrixXd dq, dk, dv;
      attention_backward_core(d_concat, bc.cross_attn, cfg.n_heads, dq, dk, dv);
      grads.cross_wq = bc.x_mid.transpose() * dq;
      grads.cross_wk = hidden.values.transpose() * dk;
      grads.cross_wv = hidden.values.transpose() * dv;
      dx += dq * block.cross_wq.transpose();
      // d(hidden) is dropped: the encoder is frozen and has no parameters.
    }

    // Causal self-attention sub-layer (activation gradients only).
    {
      const Eigen::MatrixXd d_concat = dx * block.self_wo.transpose();
      Eigen::MatrixXd dq, dk, dv;
      attention_backward_core(d_concat, bc.self_attn, cfg.n_heads, dq, dk, dv);
      const Eigen::MatrixXd d_norm1 = dq * block.self_wq.transpose() +
                                      dk * block.self_wk.transpose() +
                                      dv * block.self_wv.transpose();
      dx += layer_norm_backward(d_norm1, bc.ln1, block.ln1_gain);
    }
  }
  return result;
}

AttentionProbes attention_probes(const TokenSeq& tokens, const HiddenStateSeq& hidden,
                                 const DecoderParams& params) {
  ForwardCache cache;
  run_forward(tokens, hidden, params, /*use_cross=*/true, &cache);
  AttentionProbes probes;
  for (const BlockCache& bc : cache.blocks) {
    Eigen::MatrixXd self_rows(0, bc.self_attn.probs.front().cols());
    Eigen::MatrixXd cross_rows(0, bc.cross_attn.probs.front().cols());
    for (const Eigen::MatrixXd& p : bc.self_attn.probs) {
      self_rows.conservativeResize(self_rows.rows() + p.rows(), Eigen::NoChange);
      self_rows.bottomRows(p.rows()) = p;
    }
    for (const Eigen::MatrixXd& p : bc.cross_attn.probs) {
      cross_rows.conservativeResize(cross_rows.rows() + p.rows(), Eigen::NoChange);
      cross_rows.bottomRows(p.rows()) = p;
    }
    probes.self_rows.push_back(std::move(self_rows));
    probes.cross_rows.push_back(std::move(cross_rows));
  }
  return probes;
}

std::vector<int> generate_tokens(const std::vector<int>& prompt_ids,
                                 const HiddenStateSeq& hidden, const DecoderParams& params,
                                 int max_new, const GenOptions& options) {
  const DecoderConfig& cfg = params.config;
  const int prompt_len = static_cast<int>(prompt_ids.size()) + 1;  // with BOS
  if (prompt_len > cfg.max_len) {
    throw InvalidArgument("generate: prompt does not fit in max length");
  }
  if (max_new < 0) throw InvalidArgument("generate: negative budget");
  const int budget = std::min(max_new, cfg.max_len - prompt_len);
  if (budget == 0) return {};

  auto next_logits = [&](const std::vector<int>& ids) {
    TokenSeq seq;
    seq.ids = ids;
    seq.loss_mask.assign(ids.size(), 0);
    const Eigen::MatrixXd logits = forward(seq, hidden, params, /*use_cross=*/true);
    return Eigen::RowVectorXd(logits.row(logits.rows() - 1));
  };
  auto allowed = [](int id) {
    return id != Vocabulary::kBos && id != Vocabulary::kPad && id != Vocabulary::kUnk;
  };

  std::vector<int> base;
  base.reserve(static_cast<std::size_t>(prompt_len + budget));
  base.push_back(Vocabulary::kBos);
  base.insert(base.end(), prompt_ids.begin(), prompt_ids.end());

  if (options.strategy == GenOptions::Strategy::kGreedy) {
    std::vector<int> out;
    std::vector<int> ids = base;
    for (int step = 0; step < budget; ++step) {
      const Eigen::RowVectorXd row = next_logits(ids);
      int best = -1;
      for (int id = 0; id < cfg.vocab_size; ++id) {
        if (!allowed(id)) continue;
        if (best == -1 || row(id) > row(best)) best = id;  // ties keep lowest id
      }
      if (best == Vocabulary::kEos) break;
      out.push_back(best);
      ids.push_back(best);
    }
    return out;
  }

  // Beam search with length-normalized log-probability.
  struct Hypothesis {
    std::vector<int> generated;
    double log_prob = 0.0;
    bool done = false;
  };
  const int width = std::max(1, options.beam_width);
  std::vector<Hypothesis> beams = {{{}, 0.0, false}};
  for (int step = 0; step < budget; ++step) {
    std::vector<Hypothesis> expanded;
    bool any_live = false;
    for (const Hypothesis& hyp : beams) {
      if (hyp.done) {
        expanded.push_back(hyp);
        continue;
      }
      any_live = true;
      std::vector<int> ids = base;
      ids.insert(ids.end(), hyp.generated.begin(), hyp.generated.end());
      const Eigen::RowVectorXd row = next_logits(ids);
      const double lse = log_sum_exp(row);
      std::vector<std::pair<double, int>> scored;
      for (int id = 0; id < cfg.vocab_size; ++id) {
        if (!allowed(id)) continue;
        scored.emplace_back(row(id) - lse, id);
      }
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      const int take = std::min<int>(width, static_cast<int>(scored.size()));
      for (int i = 0; i < take; ++i) {
        Hypothesis next = hyp;
        next.log_prob += scored[static_cast<std::size_t>(i)].first;
        const int id = scored[static_cast<std::size_t>(i)].second;
        if (id == Vocabulary::kEos) {
          next.done = true;
        } else {
          next.generated.push_back(id);
        }
        expanded.push_back(std::move(next));
      }
    }
    if (!any_live) break;
    std::sort(expanded.begin(), expanded.end(), [](const Hypothesis& a, const Hypothesis& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return a.generated < b.generated;
    });
    if (static_cast<int>(expanded.size()) > width) {
      expanded.resize(static_cast<std::size_t>(width));
    }
    beams = std::move(expanded);
  }
  const auto normalized = [](const Hypothesis& h) {
    return h.log_prob / std::max<std::size_t>(1, h.generated.size() + (h.done ? 1 : 0));
  };
  const Hypothesis* best = &beams.front();
  for (const Hypothesis& h : beams) {
    if (normalized(h) > normalized(*best)) best = &h;
  }
  return best->generated;
}

}  // namespace raac
