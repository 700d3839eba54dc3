#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "raac/encoder.h"
#include "raac/vocab.h"

namespace raac {

// Word-level autoregressive transformer decoder. Every block runs causal
// self-attention, then cross-attention over the audio hidden states
// (queries from the token stream, keys/values from the audio rows, output
// scaled by tanh(gate) and added residually), then a feed-forward layer,
// all in pre-layer-norm arrangement. Base weights stay frozen; only the
// cross-attention projections and gates train.

struct DecoderConfig {
  int n_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 128;
  int max_len = 128;
  int vocab_size = 0;  // filled from the vocabulary
  int cross_dim = 64;  // must equal the encoder dim
  double gate_init = 0.0;
  // The frozen base stands in for a pretrained language model. With
  // copy_init the base gets tied output weights, sinusoidal positions and
  // a previous-token/induction attention circuit so it can echo and copy
  // prompt n-grams out of the box; otherwise it is plain random.
  bool tie_output = true;
  bool copy_init = true;
};

void validate(const DecoderConfig& config);

struct BlockParams {
  Eigen::VectorXd ln1_gain, ln1_bias;
  Eigen::MatrixXd self_wq, self_wk, self_wv, self_wo;  // d_model x d_model
  Eigen::MatrixXd cross_wq;                             // d_model x d_model
  Eigen::MatrixXd cross_wk, cross_wv;                   // cross_dim x d_model
  Eigen::MatrixXd cross_wo;                             // d_model x d_model
  double gate = 0.0;
  Eigen::VectorXd ln2_gain, ln2_bias;
  Eigen::MatrixXd ffn_w1;  // d_model x d_ff
  Eigen::MatrixXd ffn_w2;  // d_ff x d_model
};

struct DecoderParams {
  DecoderConfig config;
  Eigen::MatrixXd token_embedding;  // vocab x d_model
  Eigen::MatrixXd pos_embedding;    // max_len x d_model
  std::vector<BlockParams> blocks;
  Eigen::VectorXd lnf_gain, lnf_bias;
  Eigen::MatrixXd output_proj;  // d_model x vocab
};

DecoderParams init_decoder_params(const DecoderConfig& config, std::uint64_t seed);

// --- parameter bookkeeping -------------------------------------------------

enum class ParamGroup { kBase, kCrossAttention };

struct ParamView {
  std::string name;
  ParamGroup group;
  double* data;
  std::ptrdiff_t size;
};

// Stable enumeration of every parameter tensor.
std::vector<ParamView> parameter_views(DecoderParams& params);

struct FreezeMaskEntry {
  std::string name;
  bool trainable;  // true exactly for the cross-attention group
};
std::vector<FreezeMaskEntry> freeze_mask(const DecoderParams& params);

struct ParamCounts {
  std::int64_t cross = 0;
  std::int64_t base = 0;
  std::int64_t encoder_placeholder = 0;  // cross_dim^2, reported separately

  double fraction() const {
    return static_cast<double>(cross) /
           static_cast<double>(cross + base + encoder_placeholder);
  }
};
ParamCounts trainable_fraction(const DecoderParams& params);

// --- sequences ---------------------------------------------------------

struct TokenSeq {
  std::vector<int> ids;
  // loss_mask[t] == 1 means ids[t] is a supervised target (predicted from
  // logits at position t-1). BOS and prompt positions carry 0.
  std::vector<std::uint8_t> loss_mask;

  int length() const { return static_cast<int>(ids.size()); }
};

// [BOS] + prompt + caption + [EOS], loss masked to caption tokens and EOS.
TokenSeq make_training_sequence(const std::vector<int>& prompt_ids,
                                const std::vector<int>& caption_ids);

// --- forward / loss / gradients -----------------------------------------

// Returns logits, one row per input position. With use_cross = false the
// cross-attention sub-layer is skipped entirely (base language model);
// gates at exactly 0 take the same skip path, so a gate_init = 0 model is
// bitwise identical to the base.
Eigen::MatrixXd forward(const TokenSeq& tokens, const HiddenStateSeq& hidden,
                        const DecoderParams& params, bool use_cross = true);

// Mean token-level cross-entropy (natural log) over masked positions.
double loss(const Eigen::MatrixXd& logits, const TokenSeq& target);

struct BlockGrads {
  Eigen::MatrixXd cross_wq, cross_wk, cross_wv, cross_wo;
  double gate = 0.0;
};

struct GradResult {
  double loss_value = 0.0;
  std::vector<BlockGrads> blocks;  // exact gradients, cross-attention only
};

// Reverse-mode gradients of loss() w.r.t. the cross-attention parameters.
// Base gradients are never materialized.
GradResult grad(const TokenSeq& tokens, const HiddenStateSeq& hidden,
                const DecoderParams& params);

// Mutable flat views over the cross-attention tensors plus matching grad
// views, in the same stable order (used by the optimizer).
std::vector<ParamView> cross_attention_views(DecoderParams& params);

// Attention probability rows from a cached forward pass (for tests).
struct AttentionProbes {
  std::vector<Eigen::MatrixXd> self_rows;   // per block, per-head rows stacked
  std::vector<Eigen::MatrixXd> cross_rows;
};
AttentionProbes attention_probes(const TokenSeq& tokens, const HiddenStateSeq& hidden,
                                 const DecoderParams& params);

// --- generation ----------------------------------------------------------

struct GenOptions {
  enum class Strategy { kGreedy, kBeam };
  Strategy strategy = Strategy::kGreedy;
  int beam_width = 4;
};

// Autoregressive decoding from [BOS] + prompt_ids. Greedy takes the
// argmax (ties -> lowest id); beam search keeps length-normalized
// log-probability sums. BOS/PAD/UNK are never emitted; EOS stops.
std::vector<int> generate_tokens(const std::vector<int>& prompt_ids,
                                 const HiddenStateSeq& hidden, const DecoderParams& params,
                                 int max_new, const GenOptions& options = {});

}  // namespace raac
