#include "raac/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "raac/binio.h"
#include "raac/errors.h"
#include "raac/rng.h"
#include "raac/text.h"

namespace raac {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'P', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct Example {
  TokenSeq sequence;
  const HiddenStateSeq* hidden;
};

std::vector<double> flatten_grads(const GradResult& result) {
  std::vector<double> flat;
  for (const BlockGrads& g : result.blocks) {
    flat.insert(flat.end(), g.cross_wq.data(), g.cross_wq.data() + g.cross_wq.size());
    flat.insert(flat.end(), g.cross_wk.data(), g.cross_wk.data() + g.cross_wk.size());
    flat.insert(flat.end(), g.cross_wv.data(), g.cross_wv.data() + g.cross_wv.size());
    flat.insert(flat.end(), g.cross_wo.data(), g.cross_wo.data() + g.cross_wo.size());
    flat.push_back(g.gate);
  }
  return flat;
}

}  // namespace

std::unordered_set<std::string> matching_entry_ids(const Datastore& store,
                                                   const std::vector<std::string>& captions) {
  std::unordered_map<std::string, std::vector<std::string>> by_text;
  for (const CaptionEntry& e : store.entries()) by_text[e.text].push_back(e.entry_id);
  std::unordered_set<std::string> ids;
  for (const std::string& caption : captions) {
    const auto it = by_text.find(caption);
    if (it == by_text.end()) continue;
    ids.insert(it->second.begin(), it->second.end());
  }
  return ids;
}

TokenSeq build_example_sequence(const Vocabulary& vocab, const std::vector<std::string>& retrieved,
                                const std::string& caption, int max_len, int reserve) {
  const std::vector<int> caption_ids = vocab.encode(tokenize(caption));
  for (int used = static_cast<int>(retrieved.size()); used >= 0; --used) {
    const std::vector<std::string> kept(retrieved.begin(), retrieved.begin() + used);
    const PromptText prompt = build_prompt(kept);
    const std::vector<int> prompt_ids = vocab.encode(tokenize(prompt.text));
    TokenSeq seq = make_training_sequence(prompt_ids, caption_ids);
    if (seq.length() + reserve <= max_len) return seq;
  }
  throw InvalidArgument("sequence exceeds max length even without retrieved captions");
}

std::vector<int> build_prompt_ids(const Vocabulary& vocab, const std::vector<std::string>& retrieved,
                                  int max_len, int reserve) {
  for (int used = static_cast<int>(retrieved.size()); used >= 0; --used) {
    const std::vector<std::string> kept(retrieved.begin(), retrieved.begin() + used);
    const PromptText prompt = build_prompt(kept);
    const std::vector<int> prompt_ids = vocab.encode(tokenize(prompt.text));
    if (static_cast<int>(prompt_ids.size()) + 1 + reserve <= max_len) return prompt_ids;
  }
  throw InvalidArgument("prompt does not fit in max length");
}

TrainResult train_captioner(const Dataset& dataset, const Datastore& store,
                            DecoderConfig decoder_config, const TrainingConfig& config,
                            const std::vector<std::string>& train_domains) {
  if (config.epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (config.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (config.refs_per_sample < 1 || config.refs_per_sample > 5) {
    throw InvalidArgument("refs_per_sample must be in 1..5");
  }

  std::vector<const CorpusSample*> samples;
  if (train_domains.empty()) {
    samples = dataset.view("train");
  } else {
    for (const std::string& domain : train_domains) {
      const auto view = dataset.view("train", domain);
      samples.insert(samples.end(), view.begin(), view.end());
    }
  }
  if (samples.empty()) throw InvalidArgument("no training samples selected");

  // Vocabulary over the training captions plus the prompt scaffold words,
  // repeated so they survive the min_count threshold.
  std::vector<std::string> vocab_corpus;
  for (const CorpusSample* s : samples) {
    vocab_corpus.insert(vocab_corpus.end(), s->references.begin(), s->references.end());
  }
  const std::string scaffold = build_prompt({"a"}).text;
  for (int i = 0; i < config.min_count; ++i) vocab_corpus.push_back(scaffold);
  const Vocabulary vocab = Vocabulary::build(vocab_corpus, config.min_count);

  decoder_config.vocab_size = vocab.size();
  decoder_config.cross_dim = store.encoder_config().dim;
  validate(decoder_config);

  // Fixed per-sample conditioning: prompts and hidden states do not change
  // across epochs, so both are precomputed.
  const EncoderConfig& encoder_config = store.encoder_config();
  const RetrievalConfig retrieval{config.k};
  std::vector<HiddenStateSeq> hidden_cache;
  hidden_cache.reserve(samples.size());
  std::vector<Example> examples;
  for (const CorpusSample* sample : samples) {
    hidden_cache.push_back(audio_hidden_states(sample->audio, encoder_config));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const CorpusSample* sample = samples[i];
    const std::vector<std::string> all_refs(sample->references.begin(), sample->references.end());
    for (int r = 0; r < config.refs_per_sample; ++r) {
      const std::string& caption = sample->references[static_cast<std::size_t>(r)];
      const std::unordered_set<std::string> exclude =
          config.exclude_siblings ? matching_entry_ids(store, all_refs)
                                  : matching_entry_ids(store, {caption});
      const PromptText prompt = retrieve_and_prompt(sample->audio, store, retrieval, exclude);
      std::vector<std::string> retrieved;
      retrieved.reserve(prompt.retrieved_ids.size());
      const auto parsed = parse_prompt_captions(prompt.text);
      if (parsed.has_value()) retrieved = *parsed;
      Example example;
      example.sequence =
          build_example_sequence(vocab, retrieved, caption, decoder_config.max_len);
      example.hidden = &hidden_cache[i];
      examples.push_back(std::move(example));
    }
  }

  DecoderParams params =
      init_decoder_params(decoder_config, hash_combine(config.seed, "params"));

  const ParamCounts counts = trainable_fraction(params);
  std::fprintf(stderr, "training %lld of %lld decoder parameters (%.3f%% incl. encoder stub)\n",
               static_cast<long long>(counts.cross),
               static_cast<long long>(counts.cross + counts.base),
               100.0 * counts.fraction());

  std::vector<ParamView> views = cross_attention_views(params);
  std::ptrdiff_t total_size = 0;
  for (const ParamView& v : views) total_size += v.size;
  std::vector<double> adam_m(static_cast<std::size_t>(total_size), 0.0);
  std::vector<double> adam_v(static_cast<std::size_t>(total_size), 0.0);

  TrainResult result;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(
        hash_combine(hash_combine(config.seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
    seeded_shuffle(order, shuffle_rng);

    double epoch_loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      std::vector<double> grad_accum(static_cast<std::size_t>(total_size), 0.0);
      for (std::size_t i = begin; i < end; ++i) {
        const Example& example = examples[order[i]];
        const GradResult g = grad(example.sequence, *example.hidden, params);
        if (!std::isfinite(g.loss_value)) {
          throw NumericError("training loss is not finite");
        }
        epoch_loss_sum += g.loss_value;
        const std::vector<double> flat = flatten_grads(g);
        for (std::size_t j = 0; j < flat.size(); ++j) grad_accum[j] += flat[j] * inv_batch;
      }

      ++step;
      const double corr1 = 1.0 - std::pow(kAdamBeta1, step);
      const double corr2 = 1.0 - std::pow(kAdamBeta2, step);
      std::size_t offset = 0;
      for (const ParamView& view : views) {
        for (std::ptrdiff_t j = 0; j < view.size; ++j, ++offset) {
          const double g = grad_accum[offset];
          adam_m[offset] = kAdamBeta1 * adam_m[offset] + (1.0 - kAdamBeta1) * g;
          adam_v[offset] = kAdamBeta2 * adam_v[offset] + (1.0 - kAdamBeta2) * g * g;
          const double m_hat = adam_m[offset] / corr1;
          const double v_hat = adam_v[offset] / corr2;
          view.data[j] -= config.lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
        }
      }
    }
    result.epoch_loss.push_back(epoch_loss_sum / static_cast<double>(examples.size()));
  }

  result.checkpoint.params = std::move(params);
  result.checkpoint.vocab = vocab;
  result.checkpoint.encoder = encoder_config;
  return result;
}

std::string generate_caption(const Checkpoint& checkpoint, const PromptText& prompt,
                             const HiddenStateSeq& hidden, int max_new,
                             const GenOptions& options) {
  const std::vector<int> prompt_ids =
      checkpoint.vocab.encode(tokenize(prompt.text));
  const std::vector<int> out =
      generate_tokens(prompt_ids, hidden, checkpoint.params, max_new, options);
  std::vector<std::string> words;
  words.reserve(out.size());
  for (int id : out) words.push_back(checkpoint.vocab.word(id));
  return join(words, " ");
}

namespace {

void write_matrix(BinWriter& w, const std::string& name, const Eigen::MatrixXd& m) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  w.bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

Eigen::MatrixXd read_matrix(BinReader& r, const std::string& expected_name) {
  const std::string name = r.str();
  if (name != expected_name) {
    throw DataFormatError("checkpoint tensor order mismatch: expected " + expected_name +
                          ", found " + name);
  }
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  Eigen::MatrixXd m(rows, cols);
  r.bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const DecoderConfig& cfg = checkpoint.params.config;
  BinWriter w(path);
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(cfg.n_layers));
  w.u32(static_cast<std::uint32_t>(cfg.d_model));
  w.u32(static_cast<std::uint32_t>(cfg.n_heads));
  w.u32(static_cast<std::uint32_t>(cfg.d_ff));
  w.u32(static_cast<std::uint32_t>(cfg.max_len));
  w.u32(static_cast<std::uint32_t>(cfg.vocab_size));
  w.u32(static_cast<std::uint32_t>(cfg.cross_dim));
  w.f64(cfg.gate_init);
  w.u8(cfg.tie_output ? 1 : 0);
  w.u8(cfg.copy_init ? 1 : 0);

  const auto& words = checkpoint.vocab.words();
  w.u32(static_cast<std::uint32_t>(words.size()));
  for (const std::string& word : words) w.str(word);

  w.u32(static_cast<std::uint32_t>(checkpoint.encoder.dim));
  w.u64(checkpoint.encoder.seed);
  w.f64(checkpoint.encoder.alpha);

  auto& params = const_cast<DecoderParams&>(checkpoint.params);
  std::vector<ParamView> views = parameter_views(params);
  w.u32(static_cast<std::uint32_t>(views.size()));
  write_matrix(w, "token_embedding", params.token_embedding);
  write_matrix(w, "pos_embedding", params.pos_embedding);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    BlockParams& block = params.blocks[b];
    const std::string prefix = "block" + std::to_string(b) + ".";
    auto write_vector = [&](const std::string& name, const Eigen::VectorXd& v) {
      w.str(name);
      w.u32(static_cast<std::uint32_t>(v.size()));
      w.u32(1);
      w.bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    };
    write_vector(prefix + "ln1_gain", block.ln1_gain);
    write_vector(prefix + "ln1_bias", block.ln1_bias);
    write_matrix(w, prefix + "self_wq", block.self_wq);
    write_matrix(w, prefix + "self_wk", block.self_wk);
    write_matrix(w, prefix + "self_wv", block.self_wv);
    write_matrix(w, prefix + "self_wo", block.self_wo);
    write_matrix(w, prefix + "cross_wq", block.cross_wq);
    write_matrix(w, prefix + "cross_wk", block.cross_wk);
    write_matrix(w, prefix + "cross_wv", block.cross_wv);
    write_matrix(w, prefix + "cross_wo", block.cross_wo);
    w.str(prefix + "gate");
    w.u32(1);
    w.u32(1);
    w.f64(block.gate);
    write_vector(prefix + "ln2_gain", block.ln2_gain);
    write_vector(prefix + "ln2_bias", block.ln2_bias);
    write_matrix(w, prefix + "ffn_w1", block.ffn_w1);
    write_matrix(w, prefix + "ffn_w2", block.ffn_w2);
  }
  auto write_vector = [&](const std::string& name, const Eigen::VectorXd& v) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(v.size()));
    w.u32(1);
    w.bytes(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  };
  write_vector("lnf_gain", checkpoint.params.lnf_gain);
  write_vector("lnf_bias", checkpoint.params.lnf_bias);
  write_matrix(w, "output_proj", params.output_proj);
  w.close();
}

Checkpoint load_checkpoint(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError("bad magic bytes in " + path);
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw BadVersionError("unsupported checkpoint version " + std::to_string(version));
  }

  DecoderConfig cfg;
  cfg.n_layers = static_cast<int>(r.u32());
  cfg.d_model = static_cast<int>(r.u32());
  cfg.n_heads = static_cast<int>(r.u32());
  cfg.d_ff = static_cast<int>(r.u32());
  cfg.max_len = static_cast<int>(r.u32());
  cfg.vocab_size = static_cast<int>(r.u32());
  cfg.cross_dim = static_cast<int>(r.u32());
  cfg.gate_init = r.f64();
  cfg.tie_output = r.u8() != 0;
  cfg.copy_init = r.u8() != 0;

  const std::uint32_t word_count = r.u32();
  std::vector<std::string> words;
  words.reserve(word_count);
  for (std::uint32_t i = 0; i < word_count; ++i) words.push_back(r.str());

  Checkpoint checkpoint;
  checkpoint.vocab = Vocabulary::from_words(words);
  checkpoint.encoder.dim = static_cast<int>(r.u32());
  checkpoint.encoder.seed = r.u64();
  checkpoint.encoder.alpha = r.f64();

  validate(cfg);
  if (cfg.vocab_size != checkpoint.vocab.size()) {
    throw DataFormatError("checkpoint vocab size disagrees with word list");
  }

  const std::uint32_t tensor_count = r.u32();
  DecoderParams& params = checkpoint.params;
  params.config = cfg;
  params.blocks.resize(static_cast<std::size_t>(cfg.n_layers));

  auto read_vector = [&](const std::string& expected) {
    const Eigen::MatrixXd m = read_matrix(r, expected);
    if (m.cols() != 1) throw DataFormatError("expected column vector for " + expected);
    return Eigen::VectorXd(m.col(0));
  };

  params.token_embedding = read_matrix(r, "token_embedding");
  params.pos_embedding = read_matrix(r, "pos_embedding");
  std::uint32_t seen = 2;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    BlockParams& block = params.blocks[b];
    const std::string prefix = "block" + std::to_string(b) + ".";
    block.ln1_gain = read_vector(prefix + "ln1_gain");
    block.ln1_bias = read_vector(prefix + "ln1_bias");
    block.self_wq = read_matrix(r, prefix + "self_wq");
    block.self_wk = read_matrix(r, prefix + "self_wk");
    block.self_wv = read_matrix(r, prefix + "self_wv");
    block.self_wo = read_matrix(r, prefix + "self_wo");
    block.cross_wq = read_matrix(r, prefix + "cross_wq");
    block.cross_wk = read_matrix(r, prefix + "cross_wk");
    block.cross_wv = read_matrix(r, prefix + "cross_wv");
    block.cross_wo = read_matrix(r, prefix + "cross_wo");
    const Eigen::MatrixXd gate = read_matrix(r, prefix + "gate");
    if (gate.size() != 1) throw DataFormatError("gate tensor must hold one scalar");
    block.gate = gate(0, 0);
    block.ln2_gain = read_vector(prefix + "ln2_gain");
    block.ln2_bias = read_vector(prefix + "ln2_bias");
    block.ffn_w1 = read_matrix(r, prefix + "ffn_w1");
    block.ffn_w2 = read_matrix(r, prefix + "ffn_w2");
    seen += 15;
  }
  params.lnf_gain = read_vector("lnf_gain");
  params.lnf_bias = read_vector("lnf_bias");
  params.output_proj = read_matrix(r, "output_proj");
  seen += 3;
  if (seen != tensor_count) throw DataFormatError("checkpoint tensor count mismatch");
  if (!r.at_eof()) throw DataFormatError("trailing bytes in checkpoint " + path);
  return checkpoint;
}

void write_loss_csv(const std::vector<double>& epoch_loss, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open for writing: " + path);
  out << "epoch,mean_loss\n";
  for (std::size_t i = 0; i < epoch_loss.size(); ++i) {
    out << (i + 1) << "," << format_fixed(epoch_loss[i], 6) << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace raac
