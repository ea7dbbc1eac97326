// grurec command-line tool: train, eval, predict, synth, protocol-t, gradcheck.
//
// Exit codes: 0 success, 1 check failure, 2 config error, 3 data error,
// 4 numerical divergence. JSON goes to stdout, logs to stderr.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "grurec/grurec.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace grurec;

namespace {

enum Exit : int { kOk = 0, kCheckFailed = 1, kConfig = 2, kData = 3, kDivergence = 4 };

struct ModelFlags {
  int stacks = 5;
  std::string hidden;
  int fc = 2;
  Index fc_width = 256;
  std::string attention = "on";
  double dropout = 0.5;
};

struct TrainFlags {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  Index batch_size = 128;
  Index max_epochs = 500;
  Index patience = 50;
  double val_fraction = 0.1;
  double scale = 0.3;
  double translate = 1.0;
  double rotate = 0.0;
  bool point_layout = false;
  std::string gpsr = "on";
  double gpsr_n = 0.1;
  double gpsr_r = 0.05;
  int threads = 1;
  bool deterministic = false;
  bool timing = false;
  std::string precision = "f32";
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--stacks", f.stacks, "stacked GRU layers (3 or 5) when --hidden is not given")->capture_default_str();
  cmd->add_option("--hidden", f.hidden, "comma-separated encoder widths, e.g. 512,512,256,256,128");
  cmd->add_option("--fc", f.fc, "classifier stages (1 or 2)")->capture_default_str();
  cmd->add_option("--fc-width", f.fc_width, "width of the first classifier stage")->capture_default_str();
  cmd->add_option("--attention", f.attention, "attention module")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  cmd->add_option("--dropout", f.dropout, "dropout rate")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_val) {
  cmd->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--beta1", f.beta1)->capture_default_str();
  cmd->add_option("--beta2", f.beta2)->capture_default_str();
  cmd->add_option("--eps", f.eps, "Adam epsilon")->capture_default_str();
  cmd->add_option("--weight-decay", f.weight_decay, "L2 coefficient added to gradients")->capture_default_str();
  cmd->add_option("--batch-size", f.batch_size)->capture_default_str();
  cmd->add_option("--max-epochs", f.max_epochs)->capture_default_str();
  cmd->add_option("--patience", f.patience, "epochs without improvement before stopping")->capture_default_str();
  if (with_val) {
    cmd->add_option("--val-fraction", f.val_fraction, "stratified hold-out when --val is absent")
        ->capture_default_str();
  }
  cmd->add_option("--scale", f.scale, "augmentation: per-axis scale factor")->capture_default_str();
  cmd->add_option("--translate", f.translate, "augmentation: per-feature offset factor")->capture_default_str();
  cmd->add_option("--rotate", f.rotate, "augmentation: max yaw in radians (needs --point-layout)")
      ->capture_default_str();
  cmd->add_flag("--point-layout", f.point_layout, "features are concatenated 3-D points");
  cmd->add_option("--gpsr", f.gpsr, "stochastic path resampling")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  cmd->add_option("--gpsr-n", f.gpsr_n, "GPSR resample-count factor")->capture_default_str();
  cmd->add_option("--gpsr-r", f.gpsr_r, "GPSR remove-count factor")->capture_default_str();
  cmd->add_option("--threads", f.threads, "augmentation workers; >1 gives up byte determinism")
      ->capture_default_str();
  cmd->add_flag("--timing", f.timing, "write wall-clock elapsed_s to the history (otherwise 0)");
  cmd->add_flag("--deterministic", f.deterministic, "reject settings that break byte-identical reruns");
  cmd->add_option("--precision", f.precision, "training precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
}

std::vector<Index> parse_widths(const std::string& text) {
  std::vector<Index> widths;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v < 1) {
      throw ConfigError("--hidden: '" + item + "' is not a positive integer");
    }
    widths.push_back(static_cast<Index>(v));
  }
  if (widths.empty()) throw ConfigError("--hidden: empty width list");
  return widths;
}

ModelConfig resolve_model(const ModelFlags& f, Index input_dim, Index num_classes) {
  ModelConfig c;
  c.input_dim = input_dim;
  c.num_classes = num_classes;
  if (!f.hidden.empty()) {
    c.encoder_widths = parse_widths(f.hidden);
  } else {
    if (f.stacks != 3 && f.stacks != 5) throw ConfigError("--stacks must be 3 or 5 (or give --hidden)");
    c.encoder_widths = ModelConfig::widths_for_stacks(f.stacks);
  }
  if (f.fc != 1 && f.fc != 2) throw ConfigError("--fc must be 1 or 2");
  if (f.fc_width < 1) throw ConfigError("--fc-width must be positive");
  if (!(f.dropout >= 0.0 && f.dropout < 1.0)) throw ConfigError("--dropout must be in [0, 1)");
  c.fc_count = f.fc;
  c.fc_width = f.fc_width;
  c.use_attention = f.attention == "on";
  c.dropout_rate = f.dropout;
  c.validate();
  return c;
}

TrainConfig resolve_train(const TrainFlags& f, std::uint64_t seed) {
  if (f.batch_size < 2) {
    throw ConfigError("--batch-size must be at least 2 (batch norm needs two rows), got " +
                      std::to_string(f.batch_size));
  }
  if (!(f.lr > 0.0)) throw ConfigError("--lr must be positive");
  if (!(f.weight_decay >= 0.0)) throw ConfigError("--weight-decay must be non-negative");
  if (!(f.beta1 >= 0.0 && f.beta1 < 1.0)) throw ConfigError("--beta1 must be in [0, 1)");
  if (!(f.beta2 >= 0.0 && f.beta2 < 1.0)) throw ConfigError("--beta2 must be in [0, 1)");
  if (!(f.eps > 0.0)) throw ConfigError("--eps must be positive");
  if (f.max_epochs < 1) throw ConfigError("--max-epochs must be at least 1");
  if (f.patience < 1) throw ConfigError("--patience must be at least 1");
  if (!(f.val_fraction >= 0.0 && f.val_fraction < 1.0)) throw ConfigError("--val-fraction must be in [0, 1)");
  if (f.threads < 1) throw ConfigError("--threads must be at least 1");
  if (f.deterministic && f.threads != 1) throw ConfigError("--deterministic requires --threads 1");
  if (f.deterministic && f.timing) throw ConfigError("--deterministic cannot be combined with --timing");
  if (f.scale < 0.0 || f.scale > 1.0) throw ConfigError("--scale must be in [0, 1]");
  if (f.translate < 0.0) throw ConfigError("--translate must be non-negative");
  if (f.rotate < 0.0) throw ConfigError("--rotate must be non-negative");
  if (f.rotate > 0.0 && !f.point_layout) throw ConfigError("--rotate requires --point-layout");
  if (f.gpsr_n < 0.0 || f.gpsr_n >= 1.0) throw ConfigError("--gpsr-n must be in [0, 1)");
  if (f.gpsr_r < 0.0 || f.gpsr_r >= 1.0) throw ConfigError("--gpsr-r must be in [0, 1)");

  TrainConfig c;
  c.adam = {f.lr, f.beta1, f.beta2, f.eps, f.weight_decay};
  c.batch_size = f.batch_size;
  c.max_epochs = f.max_epochs;
  c.patience = f.patience;
  c.seed = seed;
  c.val_fraction = f.val_fraction;
  c.augmentation.scale_factor = f.scale;
  c.augmentation.translate_factor = f.translate;
  c.augmentation.rotate_factor = f.rotate;
  c.augmentation.point_layout = f.point_layout;
  c.augmentation.gpsr = {f.gpsr == "on", f.gpsr_n, f.gpsr_r};
  c.threads = f.threads;
  c.record_time = f.timing;
  c.precision = f.precision == "f64" ? Precision::f64 : Precision::f32;
  c.validate();
  return c;
}

// GRUREC_SEED, when set, wins over --seed.
struct SeedChoice {
  std::uint64_t value;
  std::string source;
};

SeedChoice resolve_seed(std::uint64_t flag_value) {
  const char* env = std::getenv("GRUREC_SEED");
  if (env == nullptr || *env == '\0') return {flag_value, "flag"};
  const std::string text(env);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-') {
    throw ConfigError("GRUREC_SEED='" + text + "' is not an unsigned 64-bit integer");
  }
  return {static_cast<std::uint64_t>(v), "GRUREC_SEED"};
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

json file_entry(const std::string& role, const std::string& path) {
  return {{"role", role}, {"path", path}, {"sha256", sha256_file(path)}, {"bytes", fs::file_size(path)}};
}

json manifest_base(const std::string& command, const SeedChoice& seed) {
  return {{"tool", "grurec"},
          {"version", GRUREC_VERSION},
          {"command", command},
          {"seed", seed.value},
          {"seed_source", seed.source}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

template <typename T>
Model<T> load_model(const std::string& path) {
  return load_checkpoint<T>(path);
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string val;
  std::string out;
  std::string history;
  std::string manifest;
  std::string from_manifest;
  std::uint64_t seed = 0;
  bool quiet = false;
  ModelFlags model;
  TrainFlags train;
};

template <typename T>
TrainResult<T> run_training(const ModelConfig& mc, const TrainConfig& tc, const Dataset& data, const Dataset* val,
                            bool quiet) {
  return train(build_model<T>(mc, tc.seed), data, val, tc, [&](const EpochRecord& r) {
    if (quiet) return;
    std::fprintf(stderr, "epoch %lld  loss %.4f  train_acc %.4f  val_acc %.4f  val_loss %.4f\n",
                 static_cast<long long>(r.epoch), r.train_loss, r.train_acc, r.val_acc, r.val_loss);
  });
}

int cmd_train(const TrainArgs& a, bool seed_given) {
  ModelConfig mc;
  TrainConfig tc;
  SeedChoice seed{a.seed, "flag"};
  std::string data_path = a.data;
  std::string val_path = a.val;
  if (!a.from_manifest.empty()) {
    std::ifstream in(a.from_manifest);
    if (!in) throw ConfigError("--from-manifest: cannot read '" + a.from_manifest + "'");
    json m;
    try {
      m = json::parse(in);
      mc = m.at("model_config").get<ModelConfig>();
      tc = m.at("train_config").get<TrainConfig>();
    } catch (const json::exception& e) {
      throw ConfigError("--from-manifest: " + std::string(e.what()));
    }
    seed = {tc.seed, "manifest"};
    if (seed_given) seed = {a.seed, "flag"};
    if (data_path.empty() || val_path.empty()) {
      for (const auto& f : m.value("inputs", json::array())) {
        if (data_path.empty() && f.value("role", "") == "data") data_path = f.value("path", "");
        if (val_path.empty() && f.value("role", "") == "val") val_path = f.value("path", "");
      }
    }
  }
  const SeedChoice env_seed = resolve_seed(seed.value);
  if (env_seed.source != "flag") seed = env_seed;
  if (data_path.empty()) throw ConfigError("--data is required");

  const Dataset data = load_dataset(data_path);
  std::optional<Dataset> val;
  if (!val_path.empty()) val = load_dataset(val_path);
  if (a.from_manifest.empty()) {
    mc = resolve_model(a.model, data.dim(), data.num_classes());
    tc = resolve_train(a.train, seed.value);
  } else {
    if (mc.input_dim != data.dim()) {
      throw DataError("data has feature dimension " + std::to_string(data.dim()) + ", manifest expects " +
                      std::to_string(mc.input_dim));
    }
    mc.num_classes = data.num_classes();
    tc.seed = seed.value;
    mc.validate();
    tc.validate();
  }

  if (!a.quiet) {
    std::fprintf(stderr, "training %zu samples, %lld classes, dim %lld, %lld parameters\n", data.samples.size(),
                 static_cast<long long>(mc.num_classes), static_cast<long long>(mc.input_dim),
                 static_cast<long long>(parameter_count(mc)));
  }
  const Dataset* val_ptr = val ? &*val : nullptr;
  std::vector<EpochRecord> history;
  Index best_epoch = 0;
  double best_val = 0.0;
  if (tc.precision == Precision::f64) {
    auto r = run_training<double>(mc, tc, data, val_ptr, a.quiet);
    save_checkpoint(r.model, a.out);
    history = std::move(r.history);
    best_epoch = r.best_epoch;
    best_val = r.best_val_acc;
  } else {
    auto r = run_training<float>(mc, tc, data, val_ptr, a.quiet);
    save_checkpoint(r.model, a.out);
    history = std::move(r.history);
    best_epoch = r.best_epoch;
    best_val = r.best_val_acc;
  }

  const std::string history_path = a.history.empty() ? a.out + ".history.jsonl" : a.history;
  std::string lines;
  for (const auto& r : history) lines += to_json(r).dump() + "\n";
  write_text(history_path, lines);

  const std::string manifest_path = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  json manifest = manifest_base("train", seed);
  manifest["model_config"] = mc;
  manifest["train_config"] = tc;
  manifest["variant"] = {{"stacks", mc.encoder_widths.size()},
                         {"fc", mc.fc_count},
                         {"attention", mc.use_attention ? "on" : "off"}};
  manifest["parameter_count"] = parameter_count(mc);
  manifest["inputs"] = json::array({file_entry("data", data_path)});
  if (!val_path.empty()) manifest["inputs"].push_back(file_entry("val", val_path));
  manifest["outputs"] = json::array({file_entry("checkpoint", a.out), file_entry("history", history_path)});
  write_text(manifest_path, manifest.dump(2) + "\n");

  json summary = {{"checkpoint", a.out},
                  {"history", history_path},
                  {"manifest", manifest_path},
                  {"epochs", history.size()},
                  {"best_epoch", best_epoch},
                  {"best_val_acc", best_val}};
  if (!history.empty()) summary["final_train_acc"] = history.back().train_acc;
  std::cout << summary.dump() << "\n";
  return kOk;
}

// ---- eval / predict ------------------------------------------------------

template <typename T>
int eval_with(const std::string& model_path, const std::string& data_path) {
  const Model<T> model = load_model<T>(model_path);
  Dataset data = load_dataset(data_path);
  if (data.dim() != model.config.input_dim) {
    throw DataError("data has feature dimension " + std::to_string(data.dim()) + ", model expects " +
                    std::to_string(model.config.input_dim));
  }
  if (!model.classes.empty()) data = with_classes(std::move(data), model.classes);
  const Metrics m = evaluate(model, data);
  std::cout << metrics_to_json(m, model.classes).dump() << "\n";
  return kOk;
}

template <typename T>
int predict_with(const std::string& model_path, const std::string& input_path) {
  const Model<T> model = load_model<T>(model_path);
  const Dataset data = load_dataset(input_path, LabelPolicy::optional);
  const auto preds = predict_batch(model, std::span<const GestureSample>(data.samples));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto idx = static_cast<std::size_t>(preds[i].label);
    json line = {{"id", data.samples[i].id},
                 {"label", idx < model.classes.size() ? json(model.classes[idx]) : json(preds[i].label)},
                 {"probs", preds[i].probs}};
    std::cout << line.dump() << "\n";
  }
  return kOk;
}

// ---- protocol-t ----------------------------------------------------------

struct ProtocolArgs {
  std::string data;
  Index t = 0;
  std::uint64_t seed = 0;
  std::string manifest;
  bool quiet = false;
  ModelFlags model;
  TrainFlags train;
};

int cmd_protocol(const ProtocolArgs& a) {
  const SeedChoice seed = resolve_seed(a.seed);
  if (a.t < 1) throw ConfigError("--T must be at least 1");
  const Dataset data = load_dataset(a.data);
  const ModelConfig mc = resolve_model(a.model, data.dim(), data.num_classes());
  const TrainConfig tc = resolve_train(a.train, seed.value);
  const auto log = [&](const ParticipantResult& p) {
    if (!a.quiet) {
      std::fprintf(stderr, "participant %s: train %lld test %lld accuracy %.4f\n", p.subject.c_str(),
                   static_cast<long long>(p.train_count), static_cast<long long>(p.test_count), p.accuracy);
    }
  };
  const ProtocolReport report = tc.precision == Precision::f64
                                    ? run_user_dependent<double>(data, a.t, mc, tc, log)
                                    : run_user_dependent<float>(data, a.t, mc, tc, log);
  if (!a.manifest.empty()) {
    json manifest = manifest_base("protocol-t", seed);
    manifest["T"] = a.t;
    manifest["model_config"] = mc;
    manifest["train_config"] = tc;
    manifest["inputs"] = json::array({file_entry("data", a.data)});
    write_text(a.manifest, manifest.dump(2) + "\n");
  }
  std::cout << to_json(report).dump() << "\n";
  return kOk;
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  Index classes = 8;
  Index train_per_class = 20;
  Index test_per_class = 20;
  Index dim = 6;
  Index subjects = 0;
  Index per_subject_class = 10;
  std::string out_dir;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  const SeedChoice seed = resolve_seed(a.seed);
  if (a.classes < 2) throw ConfigError("--classes must be at least 2");
  if (a.dim < 2) throw ConfigError("--dim must be at least 2");
  if (a.train_per_class < 0 || a.test_per_class < 0) throw ConfigError("per-class counts must be non-negative");
  if (a.subjects < 0) throw ConfigError("--subjects must be non-negative");
  if (a.subjects > 0 && a.per_subject_class < 1) throw ConfigError("--per-subject-class must be at least 1");
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw DataError("--out-dir: cannot create '" + a.out_dir + "': " + ec.message());

  const SeededRng rng(seed.value);
  json outputs = json::array();
  if (a.subjects > 0) {
    const std::string path = (fs::path(a.out_dir) / "synth_subjects.jsonl").string();
    save_dataset(path, synth_generate_subjects(a.subjects, a.classes, a.per_subject_class, a.dim, rng));
    outputs.push_back(file_entry("subjects", path));
  } else {
    const auto [train_set, test_set] = synth_generate(a.classes, a.train_per_class, a.test_per_class, a.dim, rng);
    const std::string train_path = (fs::path(a.out_dir) / "synth_train.jsonl").string();
    const std::string test_path = (fs::path(a.out_dir) / "synth_test.jsonl").string();
    save_dataset(train_path, train_set);
    save_dataset(test_path, test_set);
    outputs.push_back(file_entry("train", train_path));
    outputs.push_back(file_entry("test", test_path));
  }
  json manifest = manifest_base("synth", seed);
  manifest["config"] = {{"classes", a.classes},   {"train_per_class", a.train_per_class},
                        {"test_per_class", a.test_per_class}, {"dim", a.dim},
                        {"subjects", a.subjects}, {"per_subject_class", a.per_subject_class}};
  manifest["outputs"] = outputs;
  const std::string manifest_path = (fs::path(a.out_dir) / "synth_manifest.json").string();
  write_text(manifest_path, manifest.dump(2) + "\n");
  std::cout << json{{"outputs", outputs}, {"manifest", manifest_path}}.dump() << "\n";
  return kOk;
}

// ---- gradcheck -----------------------------------------------------------

int cmd_gradcheck(GradcheckOptions opt) {
  opt.seed = resolve_seed(opt.seed).value;
  const GradcheckReport report = run_gradcheck(opt);
  for (const auto& c : report.components) {
    std::fprintf(stderr, "%-14s max rel error %.3e  %s\n", c.name.c_str(), c.max_rel_error,
                 c.passed ? "ok" : "FAILED");
  }
  std::fprintf(stderr, "gradcheck finished in %.2f s\n", report.seconds);
  std::cout << to_json(report, opt.threshold).dump() << "\n";
  if (!report.passed) {
    for (const auto& c : report.components) {
      if (!c.passed) std::fprintf(stderr, "gradcheck failed: %s\n", c.name.c_str());
    }
    return kCheckFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRU sequence recognizer with attention"};
  app.set_version_flag("--version", GRUREC_VERSION);
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, history and manifest");
  train_cmd->add_option("--data", ta.data, "training set (JSONL)");
  train_cmd->add_option("--val", ta.val, "validation set (JSONL); default is a stratified hold-out");
  train_cmd->add_option("--out", ta.out, "checkpoint path")->required();
  train_cmd->add_option("--history", ta.history, "history JSONL path (default <out>.history.jsonl)");
  train_cmd->add_option("--manifest", ta.manifest, "manifest path (default <out>.manifest.json)");
  train_cmd->add_option("--from-manifest", ta.from_manifest, "re-run with the config and inputs of a manifest");
  auto* train_seed = train_cmd->add_option("--seed", ta.seed)->capture_default_str();
  train_cmd->add_flag("--quiet", ta.quiet, "no per-epoch log");
  add_model_flags(train_cmd, ta.model);
  add_train_flags(train_cmd, ta.train, true);

  std::string model_path, data_path, precision = "f32";
  auto* eval_cmd = app.add_subcommand("eval", "print metrics of a model on a labeled set");
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--precision", precision)->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();

  auto* predict_cmd = app.add_subcommand("predict", "print label and class probabilities per sample");
  predict_cmd->add_option("--model", model_path)->required();
  predict_cmd->add_option("--input", data_path, "samples (JSONL, labels optional)")->required();
  predict_cmd->add_option("--precision", precision)->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic gesture dataset");
  synth_cmd->add_option("--classes", sa.classes)->capture_default_str();
  synth_cmd->add_option("--train-per-class", sa.train_per_class)->capture_default_str();
  synth_cmd->add_option("--test-per-class", sa.test_per_class)->capture_default_str();
  synth_cmd->add_option("--dim", sa.dim)->capture_default_str();
  synth_cmd->add_option("--subjects", sa.subjects, "write one multi-subject file instead of train/test")
      ->capture_default_str();
  synth_cmd->add_option("--per-subject-class", sa.per_subject_class)->capture_default_str();
  synth_cmd->add_option("--out-dir", sa.out_dir)->required();
  synth_cmd->add_option("--seed", sa.seed)->capture_default_str();

  ProtocolArgs pa;
  auto* protocol_cmd = app.add_subcommand("protocol-t", "user-dependent protocol with T training samples per class");
  protocol_cmd->add_option("--data", pa.data, "dataset with subject ids")->required();
  protocol_cmd->add_option("-T,--T", pa.t, "training samples per class and participant")->required();
  protocol_cmd->add_option("--seed", pa.seed)->capture_default_str();
  protocol_cmd->add_option("--manifest", pa.manifest, "also write a manifest here");
  protocol_cmd->add_flag("--quiet", pa.quiet);
  add_model_flags(protocol_cmd, pa.model);
  add_train_flags(protocol_cmd, pa.train, false);

  GradcheckOptions go;
  auto* grad_cmd = app.add_subcommand("gradcheck", "64-bit finite-difference check of every backward pass");
  grad_cmd->add_option("--seed", go.seed)->capture_default_str();
  grad_cmd->add_option("--instantiations", go.instantiations, "random draws per component")->capture_default_str();
  grad_cmd->add_option("--perturb", go.perturb, "test hook: corrupt one component's analytic gradient")
      ->check(CLI::IsMember(gradcheck_components()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) {
      if (ta.out.empty()) throw ConfigError("--out is required");
      return cmd_train(ta, train_seed->count() > 0);
    }
    if (*eval_cmd) return precision == "f64" ? eval_with<double>(model_path, data_path) : eval_with<float>(model_path, data_path);
    if (*predict_cmd) {
      return precision == "f64" ? predict_with<double>(model_path, data_path)
                                : predict_with<float>(model_path, data_path);
    }
    if (*synth_cmd) return cmd_synth(sa);
    if (*protocol_cmd) return cmd_protocol(pa);
    if (*grad_cmd) return cmd_gradcheck(go);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence at epoch " << e.epoch() << ": " << e.what() << "\n";
    return kDivergence;
  } catch (const OracleError& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kOk;
}
