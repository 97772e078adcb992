// SPDX-License-Identifier: Apache-2.0
#include "hnlg/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "hnlg/error.hpp"
#include "hnlg/keyvalue.hpp"
#include "hnlg/rng.hpp"

namespace hnlg::experiment {

namespace fs = std::filesystem;
using corpus::GeneratingOrder;
using model::AttentionKind;

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// %.17g keeps doubles exact in the canonical text.
std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path resolve(const std::string& value, const fs::path& base) {
  fs::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

// Rank of the attention-free variant label in the result tables.
int variant_rank(const ExperimentConfig& c) {
  if (!c.hierarchical) return 0;
  if (c.repeat_input && c.curriculum) return 4;
  if (c.curriculum) return 3;
  if (c.repeat_input) return 2;
  return 1;
}

std::string base_label(int rank) {
  switch (rank) {
    case 0: return "Sequence-to-Sequence Model";
    case 1: return "+ Hierarchical Decoder";
    case 2: return "+ Hierarchical Decoder, Repeat-Input";
    case 3: return "+ Hierarchical Decoder, Curriculum Learning";
    default: return "+ All";
  }
}

std::string attention_label(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::dot: return " + dot-product attention";
    case AttentionKind::general: return " + general attention";
    case AttentionKind::concat: return " + concatenation attention";
    case AttentionKind::none: break;
  }
  return "";
}

struct Data {
  std::vector<corpus::MrGroup> train, dev, test;
  corpus::Vocabulary vocab;
};

Data load_data(const ExperimentConfig& c) {
  Data d;
  auto groups = corpus::load_tagged_corpus(c.train_path);
  auto [tr, dv] = training::split_groups(groups, c.dev_fraction, numkit::derive_seed(c.seed, 4));
  d.train = std::move(tr);
  d.dev = std::move(dv);
  d.test = corpus::load_tagged_corpus(c.test_path);
  d.vocab = corpus::Vocabulary::build(d.train);
  return d;
}

metrics::Scores test_scores(model::Model& m, const Data& d, bool repeat) {
  auto items = training::make_eval_items(d.test, d.vocab);
  if (items.empty()) throw std::runtime_error("test split is empty");
  return training::evaluate(m, items, d.vocab, repeat);
}

void write_report(const fs::path& dir, const ReportRow& row) {
  write_file(dir / "report.tsv", ReportRow::header() + "\n" + row.str() + "\n");
}

std::optional<ReportRow> read_report(const fs::path& dir) {
  std::ifstream in(dir / "report.tsv");
  if (!in) return std::nullopt;
  std::string header, line;
  if (!std::getline(in, header) || header != ReportRow::header() || !std::getline(in, line)) return std::nullopt;
  try {
    return ReportRow::parse(line);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig ExperimentConfig::parse(std::string_view text, const fs::path& base_dir,
                                         std::string default_id) {
  ExperimentConfig c;
  c.id = std::move(default_id);
  std::vector<std::pair<std::string, std::string>> kv;
  try {
    kv = parse_key_values(text);
  } catch (const ParseError& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  try {
    for (const auto& [key, value] : kv) {
      if (key == "id") c.id = value;
      else if (key == "train") c.train_path = resolve(value, base_dir);
      else if (key == "test") c.test_path = resolve(value, base_dir);
      else if (key == "out") c.out = resolve(value, base_dir);
      else if (key == "order") c.order = GeneratingOrder::parse(value, true);
      else if (key == "hierarchical") c.hierarchical = parse_bool(value, key);
      else if (key == "repeat_input") c.repeat_input = parse_bool(value, key);
      else if (key == "curriculum") c.curriculum = parse_bool(value, key);
      else if (key == "attention") c.attention = model::parse_attention(value);
      else if (key == "epochs") c.epochs = parse_uint(value, key);
      else if (key == "curriculum_span") c.curriculum_span = parse_uint(value, key);
      else if (key == "tf_prob") c.tf_prob = parse_double(value, key);
      else if (key == "tf_decay") c.tf_decay = parse_double(value, key);
      else if (key == "batch_size") c.batch_size = parse_uint(value, key);
      else if (key == "learning_rate") c.learning_rate = parse_double(value, key);
      else if (key == "embed_dim") c.embed_dim = parse_uint(value, key);
      else if (key == "encoder_hidden") c.encoder_hidden = parse_uint(value, key);
      else if (key == "flat_hidden") c.flat_hidden = parse_uint(value, key);
      else if (key == "max_decode_len") c.max_decode_len = parse_uint(value, key);
      else if (key == "dev_fraction") c.dev_fraction = parse_double(value, key);
      else if (key == "seed") c.seed = parse_uint(value, key);
      else if (key == "decoder_hidden") {
        c.decoder_hidden.clear();
        for (const auto& part : split(value, ',')) c.decoder_hidden.push_back(parse_uint(trim(part), key));
        if (c.decoder_hidden.size() == 1) c.decoder_hidden.assign(corpus::kLayers, c.decoder_hidden[0]);
      } else
        throw UsageError("config: unknown key '" + key + "'");
    }
  } catch (const ParseError& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const ContractError& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path(), path.stem().string());
}

void ExperimentConfig::validate() const {
  if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..")
    throw UsageError("config: id must be a plain name, got '" + id + "'");
  if (!hierarchical && repeat_input) throw UsageError("config: repeat_input requires hierarchical = true");
  if (!hierarchical && curriculum) throw UsageError("config: curriculum requires hierarchical = true");
  if (!hierarchical && attention != AttentionKind::none)
    throw UsageError("config: attention requires hierarchical = true");
  if (decoder_hidden.size() != corpus::kLayers)
    throw UsageError("config: decoder_hidden needs 1 or " + std::to_string(corpus::kLayers) + " sizes");
  if (attention == AttentionKind::dot &&
      std::adjacent_find(decoder_hidden.begin(), decoder_hidden.end(), std::not_equal_to<>()) != decoder_hidden.end())
    throw UsageError("config: dot attention needs equal decoder_hidden sizes");
  if (epochs == 0) throw UsageError("config: epochs must be positive");
  if (curriculum_span == 0) throw UsageError("config: curriculum_span must be positive");
  if (batch_size == 0) throw UsageError("config: batch_size must be positive");
  if (!(tf_prob >= 0 && tf_prob <= 1)) throw UsageError("config: tf_prob must lie in [0, 1]");
  if (!(tf_decay > 0 && tf_decay <= 1)) throw UsageError("config: tf_decay must lie in (0, 1]");
  if (!(learning_rate > 0)) throw UsageError("config: learning_rate must be positive");
  if (!(dev_fraction >= 0 && dev_fraction < 1)) throw UsageError("config: dev_fraction must lie in [0, 1)");
  if (embed_dim == 0 || encoder_hidden == 0 || flat_hidden == 0 || max_decode_len == 0 ||
      std::find(decoder_hidden.begin(), decoder_hidden.end(), 0u) != decoder_hidden.end())
    throw UsageError("config: model sizes must be positive");
}

void ExperimentConfig::check_paths() const {
  for (const auto* p : {&train_path, &test_path}) {
    if (p->empty()) throw UsageError("config: train and test paths are required");
    if (!fs::is_regular_file(*p)) throw UsageError("data file not found: " + p->string());
  }
}

std::string ExperimentConfig::variant() const { return base_label(variant_rank(*this)) + attention_label(attention); }

std::string ExperimentConfig::canonical() const {
  std::ostringstream s;
  s << "train = " << train_path.filename().string() << "\n"
    << "test = " << test_path.filename().string() << "\n"
    << "order = " << order.str() << "\n"
    << "hierarchical = " << bool_text(hierarchical) << "\n"
    << "repeat_input = " << bool_text(repeat_input) << "\n"
    << "curriculum = " << bool_text(curriculum) << "\n"
    << "attention = " << model::attention_name(attention) << "\n"
    << "epochs = " << epochs << "\n"
    << "curriculum_span = " << curriculum_span << "\n"
    << "tf_prob = " << exact(tf_prob) << "\n"
    << "tf_decay = " << exact(tf_decay) << "\n"
    << "batch_size = " << batch_size << "\n"
    << "learning_rate = " << exact(learning_rate) << "\n"
    << "embed_dim = " << embed_dim << "\n"
    << "encoder_hidden = " << encoder_hidden << "\n"
    << "decoder_hidden = " << join_sizes(decoder_hidden) << "\n"
    << "flat_hidden = " << flat_hidden << "\n"
    << "max_decode_len = " << max_decode_len << "\n"
    << "dev_fraction = " << exact(dev_fraction) << "\n"
    << "seed = " << seed << "\n";
  return s.str();
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = fnv1a(canonical());
  for (const auto* p : {&train_path, &test_path}) {
    const std::uint64_t data = fnv1a(read_file(*p));
    h = fnv1a(hash_hex(data), h);
  }
  return h;
}

model::ModelConfig ExperimentConfig::model_config(std::size_t vocab_size) const {
  model::ModelConfig m = hierarchical ? model::ModelConfig{} : model::flat_config(vocab_size, flat_hidden);
  m.vocab_size = vocab_size;
  m.embed_dim = embed_dim;
  m.encoder_hidden = encoder_hidden;
  if (hierarchical) m.decoder_hidden = decoder_hidden;
  m.attention = attention;
  m.order = order;
  m.max_decode_len = max_decode_len;
  return m;
}

training::Schedule ExperimentConfig::schedule() const {
  training::Schedule s;
  s.epochs = epochs;
  s.curriculum_span = curriculum_span;
  s.curriculum = curriculum;
  s.repeat_input = repeat_input;
  s.tf_prob = tf_prob;
  s.tf_decay = tf_decay;
  s.batch_size = batch_size;
  s.learning_rate = learning_rate;
  s.seed = seed;
  return s;
}

// ---------------------------------------------------------------------------

std::string ReportRow::header() {
  return "config_id\torder\tBLEU\tROUGE-1\tROUGE-2\tROUGE-L\tvariant\thierarchical\trepeat_input\tcurriculum\t"
         "attention\tseed\thash";
}

std::string ReportRow::str() const {
  std::ostringstream s;
  s << config_id << '\t' << order << '\t' << metrics::format_score(scores.bleu) << '\t'
    << metrics::format_score(scores.rouge1) << '\t' << metrics::format_score(scores.rouge2) << '\t'
    << metrics::format_score(scores.rouge_l) << '\t' << variant << '\t' << bool_text(hierarchical) << '\t'
    << bool_text(repeat_input) << '\t' << bool_text(curriculum) << '\t' << attention << '\t' << seed << '\t' << hash;
  return s.str();
}

ReportRow ReportRow::parse(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  const auto f = split(line, '\t');
  if (f.size() != 13) throw ParseError("report row needs 13 fields, got " + std::to_string(f.size()));
  ReportRow r;
  r.config_id = f[0];
  r.order = f[1];
  r.scores = {parse_double(f[2], "BLEU"), parse_double(f[3], "ROUGE-1"), parse_double(f[4], "ROUGE-2"),
              parse_double(f[5], "ROUGE-L")};
  r.variant = f[6];
  r.hierarchical = parse_bool(f[7], "hierarchical");
  r.repeat_input = parse_bool(f[8], "repeat_input");
  r.curriculum = parse_bool(f[9], "curriculum");
  r.attention = f[10];
  r.seed = parse_uint(f[11], "seed");
  r.hash = f[12];
  try {
    r.order_index = GeneratingOrder::parse(r.order, true).table_index();
  } catch (const ContractError&) {
    throw ParseError("report row has a bad order '" + r.order + "'");
  }
  return r;
}

ReportRow make_row(const ExperimentConfig& c, const metrics::Scores& scores) {
  ReportRow r;
  r.config_id = c.id;
  r.order = c.order.str();
  r.order_index = c.order.table_index();
  r.scores = scores;
  r.variant = c.variant();
  r.hierarchical = c.hierarchical;
  r.repeat_input = c.repeat_input;
  r.curriculum = c.curriculum;
  r.attention = model::attention_name(c.attention);
  r.seed = c.seed;
  r.hash = hash_hex(c.hash());
  return r;
}

RunResult run(const ExperimentConfig& config) {
  config.validate();
  config.check_paths();
  const Data data = load_data(config);
  if (data.train.empty()) throw std::runtime_error("training split is empty");

  const fs::path dir = config.run_dir();
  fs::create_directories(dir);
  // Stale artifacts from an earlier config must not survive a rerun.
  fs::remove(dir / "report.tsv");
  fs::remove_all(dir / "checkpoints");

  model::Model m(config.model_config(data.vocab.size()), numkit::derive_seed(config.seed, 5));
  const auto examples = training::make_examples(data.train, config.order, data.vocab);
  const auto dev = training::make_eval_items(data.dev, data.vocab);

  std::ofstream log(dir / "train.tsv");
  training::TrainHooks hooks;
  hooks.log = &log;
  hooks.checkpoint_dir = dir / "checkpoints";

  RunResult result;
  result.trace = training::train(m, data.vocab, examples, dev, config.schedule(), hooks);
  log.close();

  std::ostringstream trace;
  trace << "epoch\ttrainable_layers\ttf_prob\ttotal\tdev_bleu\n";
  for (const auto& e : result.trace.epochs)
    trace << e.epoch << '\t' << e.trainable << '\t' << exact(e.tf_prob) << '\t' << exact(e.total) << '\t'
          << (e.dev_bleu ? metrics::format_score(*e.dev_bleu) : "-") << '\n';
  write_file(dir / "dev_bleu.tsv", trace.str());

  m.save(dir / "model");
  data.vocab.save(dir / "model" / "vocab.txt");
  write_file(dir / "config.cfg", "id = " + config.id + "\n" + config.canonical());

  result.row = make_row(config, test_scores(m, data, config.repeat_input));
  write_report(dir, result.row);
  return result;
}

ReportRow evaluate_run(const ExperimentConfig& config) {
  config.validate();
  config.check_paths();
  const fs::path model_dir = config.run_dir() / "model";
  if (!fs::is_regular_file(model_dir / "model.ckpt"))
    throw UsageError("no trained model in " + model_dir.string() + "; run train first");
  auto m = model::Model::load(model_dir);
  const auto vocab = corpus::Vocabulary::load(model_dir / "vocab.txt");
  Data data;
  data.test = corpus::load_tagged_corpus(config.test_path);
  data.vocab = vocab;
  return make_row(config, test_scores(m, data, config.repeat_input));
}

std::string stats_table(const ExperimentConfig& config) {
  config.check_paths();
  // Whole files here; the dev hold-out is a training detail.
  Data data;
  data.train = corpus::load_tagged_corpus(config.train_path);
  data.test = corpus::load_tagged_corpus(config.test_path);
  data.vocab = corpus::Vocabulary::build(data.train);
  std::ostringstream s;
  s << "split\torder\tl1\tl2\tl3\tl4\n";
  const std::pair<const char*, const std::vector<corpus::MrGroup>*> splits[] = {{"train", &data.train},
                                                                                {"test", &data.test}};
  for (const auto& [name, groups] : splits) {
    std::vector<corpus::TaggedSentence> sentences;
    for (const auto& g : *groups)
      for (const auto& ref : g.references) sentences.push_back(corpus::delexicalize(g.frame, ref).sentence);
    if (sentences.empty()) throw UsageError(std::string(name) + " split has no sentences");
    for (int k = 1; k <= 6; ++k) {
      const auto order = GeneratingOrder::table_order(k);
      std::vector<corpus::LayerTargetSet> targets;
      targets.reserve(sentences.size());
      for (const auto& sent : sentences) targets.push_back(corpus::build_layer_targets(sent, order, data.vocab));
      const auto means = corpus::length_stats(targets);
      s << name << '\t' << order.pretty();
      for (double v : means) s << '\t' << metrics::format_score(v);
      s << '\n';
    }
  }
  return s.str();
}

// ---------------------------------------------------------------------------

namespace {

struct GridEntry {
  std::string file;
  std::optional<ReportRow> row;
  std::string error;
  int order_index = 0;
  int rank = 0;
  int attention = 0;
  std::string order;
};

std::string md_escape(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

GridSummary grid(const fs::path& config_dir, const fs::path& out, std::optional<std::uint64_t> seed,
                 std::ostream* progress) {
  if (!fs::is_directory(config_dir)) throw UsageError("not a directory: " + config_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(config_dir))
    if (e.is_regular_file() && e.path().extension() == ".cfg") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  GridSummary summary;
  std::vector<GridEntry> entries;
  std::set<std::string> ids;
  for (const auto& file : files) {
    GridEntry entry;
    entry.file = file.filename().string();
    try {
      auto c = ExperimentConfig::load(file);
      if (seed) c.seed = *seed;
      c.out = out;
      entry.order_index = c.order.table_index();
      entry.order = c.order.str();
      entry.rank = variant_rank(c);
      entry.attention = static_cast<int>(c.attention);
      if (!ids.insert(c.id).second) throw UsageError("duplicate run id '" + c.id + "'");
      c.check_paths();
      const std::string h = hash_hex(c.hash());
      auto existing = read_report(c.run_dir());
      if (existing && existing->hash == h && existing->config_id == c.id) {
        entry.row = *existing;
        ++summary.reused;
        if (progress) *progress << entry.file << ": reused\n";
      } else {
        if (progress) *progress << entry.file << ": running\n" << std::flush;
        entry.row = run(c).row;
        ++summary.completed;
        if (progress) *progress << entry.file << ": " << entry.row->str() << "\n";
      }
    } catch (const std::exception& e) {
      entry.error = e.what();
      ++summary.failed;
      if (progress) *progress << entry.file << ": failed: " << entry.error << "\n";
    }
    entries.push_back(std::move(entry));
  }

  // Grid orders first (1..6), custom orders after them.
  auto order_key = [](const GridEntry& e) { return e.order_index == 0 ? 7 : e.order_index; };
  std::stable_sort(entries.begin(), entries.end(), [&](const GridEntry& a, const GridEntry& b) {
    return std::tuple(order_key(a), a.order, a.rank, a.attention, a.file) <
           std::tuple(order_key(b), b.order, b.rank, b.attention, b.file);
  });

  std::ostringstream tsv, md;
  tsv << ReportRow::header() << "\tstatus\n";
  md << "# Experiment grid\n\n"
     << "BLEU is corpus-level BLEU-4 without smoothing. ROUGE-1, ROUGE-2 and ROUGE-L are F1 against the best "
        "reference, averaged over test items. All scores x100, on delexicalized text.\n\n"
     << "| config | order | variant | BLEU | ROUGE-1 | ROUGE-2 | ROUGE-L | seed | status |\n"
     << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& e : entries) {
    if (e.row) {
      const auto& r = *e.row;
      tsv << r.str() << "\tok\n";
      md << "| " << md_escape(r.config_id) << " | " << md_escape(GeneratingOrder::parse(r.order, true).pretty())
         << " | " << md_escape(r.variant) << " | " << metrics::format_score(r.scores.bleu) << " | "
         << metrics::format_score(r.scores.rouge1) << " | " << metrics::format_score(r.scores.rouge2) << " | "
         << metrics::format_score(r.scores.rouge_l) << " | " << r.seed << " | ok |\n";
    } else {
      std::string err = e.error;
      std::replace(err.begin(), err.end(), '\t', ' ');
      std::replace(err.begin(), err.end(), '\n', ' ');
      tsv << e.file << '\t' << e.order << "\t-\t-\t-\t-\t-\t-\t-\t-\t-\t-\t-\tfailed: " << err << '\n';
      md << "| " << md_escape(e.file) << " | " << md_escape(e.order) << " | - | - | - | - | - | - | failed: "
         << md_escape(err) << " |\n";
    }
  }
  fs::create_directories(out);
  write_file(out / "grid.tsv", tsv.str());
  write_file(out / "grid.md", md.str());
  return summary;
}

}  // namespace hnlg::experiment
