// Command-line front end: data synthesis, training, evaluation, prediction
// and the numeric verification suites.

#include "mtaa/checkpoint.hpp"
#include "mtaa/data.hpp"
#include "mtaa/image_io.hpp"
#include "mtaa/metrics.hpp"
#include "mtaa/trainer.hpp"
#include "mtaa/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

#ifndef MTAA_VERSION
#define MTAA_VERSION "0.0.0"
#endif

fs::path resolve_out_dir(const std::string& out) {
  fs::path p(out);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("MTAA_OUT_ROOT"); root != nullptr && *root != '\0') {
    return fs::path(root) / p;
  }
  return p;
}

void write_run_manifest(const fs::path& dir, const std::string& command, std::uint64_t seed,
                        const std::map<std::string, std::string>& config,
                        const std::map<std::string, std::string>& artifacts) {
  json j;
  j["tool"] = "mtaa";
  j["version"] = MTAA_VERSION;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  j["artifacts"] = artifacts;
  std::ofstream os(dir / "run_manifest.json", std::ios::binary);
  if (!os) throw mtaa::IoError("cannot write run manifest in " + dir.string());
  os << j.dump(2) << "\n";
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string field;
  while (std::getline(is, field, ',')) {
    if (field.empty()) continue;
    out.push_back(std::stoi(field));
  }
  return out;
}

mtaa::Vec parse_double_list(const std::string& s) {
  std::vector<double> vals;
  std::istringstream is(s);
  std::string field;
  while (std::getline(is, field, ',')) {
    if (field.empty()) continue;
    vals.push_back(std::stod(field));
  }
  mtaa::Vec v(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
  return v;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// ---------------------------------------------------------------------------
// train config file: flat `key = value` text, '#' comments
// ---------------------------------------------------------------------------

struct TrainSetup {
  mtaa::TrainConfig config;
  mtaa::PreprocessOptions preprocess;
};

void apply_config_entry(TrainSetup& s, const std::string& key, const std::string& value) {
  auto& c = s.config;
  if (key == "mode") c.mode = mtaa::train_mode_from_string(value);
  else if (key == "lr") c.lr = std::stod(value);
  else if (key == "momentum") c.momentum = std::stod(value);
  else if (key == "lr_halve_every") c.lr_halve_every = std::stoi(value);
  else if (key == "epochs") c.epochs = std::stoi(value);
  else if (key == "batch_size") c.batch_size = std::stoi(value);
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "emd_r") c.emd.r = std::stod(value);
  else if (key == "delta_every") c.delta_every = std::stoi(value);
  else if (key == "preprocessing") c.preprocessing = mtaa::preprocessing_from_string(value);
  else if (key == "linear_weights") c.linear_weights = parse_double_list(value);
  else if (key == "encoder_hidden") c.arch.encoder_hidden = parse_int_list(value);
  else if (key == "latent_dim") c.arch.latent_dim = std::stoi(value);
  else if (key == "head_hidden") c.arch.head_hidden = parse_int_list(value);
  else if (key == "activation") c.arch.activation = mtaa::activation_from_string(value);
  else if (key == "train_frac") c.split.train_frac = std::stod(value);
  else if (key == "val_frac") c.split.val_frac = std::stod(value);
  else if (key == "test_frac") c.split.test_frac = std::stod(value);
  else if (key == "grid_h") s.preprocess.grid_h = std::stoi(value);
  else if (key == "grid_w") s.preprocess.grid_w = std::stoi(value);
  else if (key == "n_local") s.preprocess.patches.n_local = std::stoi(value);
  else if (key == "n_global") s.preprocess.patches.n_global = std::stoi(value);
  else if (key == "patch_h") s.preprocess.patches.patch_height = std::stoi(value);
  else if (key == "patch_w") s.preprocess.patches.patch_width = std::stoi(value);
  else throw mtaa::InvalidInput("unknown config key '" + key + "'");
}

void load_config_file(TrainSetup& s, const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw mtaa::IoError("cannot open config file: " + path.string());
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) {
      throw mtaa::ParseError("config line is not 'key = value'", line_no);
    }
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_entry(s, key, value);
    } catch (const std::invalid_argument&) {
      throw mtaa::ParseError("bad value for config key '" + key + "'", line_no);
    } catch (const std::out_of_range&) {
      throw mtaa::ParseError("value out of range for config key '" + key + "'", line_no);
    }
  }
}

std::map<std::string, std::string> snapshot_config(const TrainSetup& s) {
  const auto& c = s.config;
  std::map<std::string, std::string> m;
  m["mode"] = mtaa::to_string(c.mode);
  m["lr"] = std::to_string(c.lr);
  m["momentum"] = std::to_string(c.momentum);
  m["lr_halve_every"] = std::to_string(c.lr_halve_every);
  m["epochs"] = std::to_string(c.epochs);
  m["batch_size"] = std::to_string(c.batch_size);
  m["seed"] = std::to_string(c.seed);
  m["emd_r"] = std::to_string(c.emd.r);
  m["delta_every"] = std::to_string(c.delta_every);
  m["preprocessing"] = mtaa::to_string(c.preprocessing);
  m["encoder_hidden"] = fmt_list(c.arch.encoder_hidden);
  m["latent_dim"] = std::to_string(c.arch.latent_dim);
  m["head_hidden"] = fmt_list(c.arch.head_hidden);
  m["activation"] = mtaa::to_string(c.arch.activation);
  m["input_dim"] = std::to_string(c.arch.input_dim);
  m["train_frac"] = std::to_string(c.split.train_frac);
  m["val_frac"] = std::to_string(c.split.val_frac);
  m["test_frac"] = std::to_string(c.split.test_frac);
  if (c.linear_weights.size() != 0) {
    std::string w;
    for (int i = 0; i < c.linear_weights.size(); ++i) {
      w += (i ? "," : "") + std::to_string(c.linear_weights[i]);
    }
    m["linear_weights"] = w;
  }
  return m;
}

// ---------------------------------------------------------------------------

int cmd_synth(int n, std::uint64_t seed, int feature_dim, double noise, double corr,
              double kernel_width, const std::string& out) {
  mtaa::SynthProfile profile;
  profile.feature_dim = feature_dim;
  profile.corr_strong = corr;
  profile.kernel_width = kernel_width;
  const mtaa::SynthDataset data = mtaa::synth_generate(n, profile, noise, seed);

  const fs::path dir = resolve_out_dir(out);
  fs::create_directories(dir);

  std::vector<mtaa::SampleRecord> records = data.records;
  for (auto& rec : records) rec.source = "features.csv";
  std::vector<std::string> ids;
  for (const auto& rec : records) ids.push_back(rec.id);

  mtaa::save_manifest(dir / "manifest.csv", records);
  mtaa::save_features(dir / "features.csv", ids, data.features);
  write_run_manifest(dir, "synth", seed,
                     {{"n", std::to_string(n)},
                      {"feature_dim", std::to_string(feature_dim)},
                      {"noise", std::to_string(noise)},
                      {"corr_strong", std::to_string(corr)},
                      {"kernel_width", std::to_string(kernel_width)}},
                     {{"manifest", "manifest.csv"}, {"features", "features.csv"}});
  std::cout << "wrote " << records.size() << " records to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const TrainSetup& setup, const std::string& data_path, const std::string& out,
              const std::string& resume_path) {
  mtaa::PreprocessOptions pre = setup.preprocess;
  pre.strategy = setup.config.preprocessing;
  pre.seed = setup.config.seed;

  mtaa::Dataset dataset = mtaa::load_dataset(data_path, pre);
  if (dataset.size() == 0) throw mtaa::InvalidInput("dataset is empty");

  mtaa::TrainConfig config = setup.config;
  config.arch.input_dim = dataset.feature_dim();
  config.split.seed = config.seed;
  config.validate();

  std::optional<mtaa::Checkpoint> resume;
  if (!resume_path.empty()) resume = mtaa::load_checkpoint(resume_path);

  const fs::path dir = resolve_out_dir(out);
  fs::create_directories(dir);

  const mtaa::TrainResult result =
      mtaa::train(config, dataset, resume ? &*resume : nullptr);

  mtaa::Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.trainer = result.final_state;
  mtaa::save_checkpoint(dir / "checkpoint.bin", ckpt);
  mtaa::save_train_log(dir / "train_log.csv", result.log);

  TrainSetup snap = setup;
  snap.config = config;
  write_run_manifest(dir, "train", config.seed, snapshot_config(snap),
                     {{"checkpoint", "checkpoint.bin"}, {"train_log", "train_log.csv"}});

  if (result.aborted) {
    std::cerr << "numeric failure: training aborted, last good checkpoint retained\n";
    return kExitNumeric;
  }
  std::cout << "mode " << mtaa::to_string(config.mode) << ", best epoch " << result.best_epoch
            << ", mean validation EMD " << result.best_val << "\n";
  std::cout << "checkpoint: " << (dir / "checkpoint.bin").string() << "\n";
  return kExitOk;
}

mtaa::Dataset dataset_for_inference(const std::string& data_path,
                                    const std::vector<std::string>& images,
                                    const mtaa::PreprocessOptions& pre) {
  if (!data_path.empty()) return mtaa::load_dataset(data_path, pre);
  mtaa::Dataset out;
  std::vector<mtaa::Vec> rows;
  for (const std::string& path : images) {
    const mtaa::Image img = mtaa::load_image(path);
    const std::string id = fs::path(path).filename().string();
    const std::vector<mtaa::Vec> feature_rows = mtaa::preprocess_image(img, pre, id);
    for (std::size_t k = 0; k < feature_rows.size(); ++k) {
      mtaa::SampleRecord rec;
      rec.id = id + (feature_rows.size() > 1 ? "#p" + std::to_string(k) : "");
      rec.source = path;
      out.records.push_back(std::move(rec));
      rows.push_back(feature_rows[k]);
    }
  }
  out.features = mtaa::Mat(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.features.row(i) = rows[i].transpose();
  return out;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_path,
                const std::vector<std::string>& images, const std::string& preprocessing,
                const std::string& out) {
  if (data_path.empty() && images.empty()) {
    throw mtaa::InvalidInput("predict needs --data or --images");
  }
  const mtaa::Checkpoint ckpt = mtaa::load_checkpoint(ckpt_path);
  mtaa::PreprocessOptions pre;
  pre.strategy = mtaa::preprocessing_from_string(preprocessing);
  const mtaa::Dataset dataset = dataset_for_inference(data_path, images, pre);
  if (dataset.size() == 0) throw mtaa::InvalidInput("nothing to predict");
  if (dataset.feature_dim() != ckpt.params.arch.input_dim) {
    throw mtaa::InvalidInput("input features do not match the checkpoint architecture");
  }

  const std::vector<mtaa::SampleRecord> preds = mtaa::predict_records(ckpt.params, dataset);
  const fs::path dir = resolve_out_dir(out);
  fs::create_directories(dir);
  mtaa::save_manifest(dir / "predictions.csv", preds);
  write_run_manifest(dir, "predict", 0, {{"checkpoint", ckpt_path}},
                     {{"predictions", "predictions.csv"}});
  std::cout << "wrote predictions for " << preds.size() << " images to "
            << (dir / "predictions.csv").string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& preprocessing, const std::string& out) {
  const mtaa::Checkpoint ckpt = mtaa::load_checkpoint(ckpt_path);
  mtaa::PreprocessOptions pre;
  pre.strategy = mtaa::preprocessing_from_string(preprocessing);
  const mtaa::Dataset dataset = mtaa::load_dataset(data_path, pre);
  if (dataset.size() == 0) throw mtaa::InvalidInput("dataset is empty");
  if (dataset.feature_dim() != ckpt.params.arch.input_dim) {
    throw mtaa::InvalidInput("input features do not match the checkpoint architecture");
  }

  const std::vector<mtaa::SampleRecord> preds = mtaa::predict_records(ckpt.params, dataset);
  const std::vector<mtaa::SampleRecord> truth = mtaa::load_manifest(data_path);
  const mtaa::EvalReport report = mtaa::evaluate(preds, truth);
  const std::string table = mtaa::format_eval_table(report);
  std::cout << table;

  const fs::path dir = resolve_out_dir(out);
  fs::create_directories(dir);
  std::ofstream os(dir / "eval_report.csv", std::ios::binary);
  if (!os) throw mtaa::IoError("cannot write eval report");
  os << table;
  os.close();
  write_run_manifest(dir, "eval", 0, {{"checkpoint", ckpt_path}},
                     {{"eval_report", "eval_report.csv"}});
  return kExitOk;
}

int cmd_verify(const std::string& only, std::uint64_t seed, const std::string& fault, bool list) {
  if (list) {
    for (const std::string& name : mtaa::verification_suites()) std::cout << name << "\n";
    return kExitOk;
  }
  mtaa::VerifyOptions options;
  options.only = only;
  options.seed = seed;
  options.fault = fault;
  const std::vector<mtaa::CheckResult> results = mtaa::run_verification(options);
  bool all_passed = true;
  for (const mtaa::CheckResult& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    all_passed = all_passed && r.passed;
  }
  return all_passed ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task aesthetic score distribution toolkit"};
  app.set_version_flag("--version", MTAA_VERSION);
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic correlated-task dataset");
  int synth_n = 0;
  std::uint64_t synth_seed = 0;
  int synth_dim = 8;
  double synth_noise = 0.05, synth_corr = 0.85, synth_width = 1.0;
  std::string synth_out = "synth-run";
  synth->add_option("--n", synth_n, "Number of records")->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--feature-dim", synth_dim, "Feature dimension (>= 4)");
  synth->add_option("--noise", synth_noise, "Score noise level");
  synth->add_option("--corr", synth_corr, "Cosine between correlated score directions");
  synth->add_option("--kernel-width", synth_width, "Triangular kernel width (>= 1)");
  synth->add_option("--out", synth_out, "Output directory");

  // train
  auto* train = app.add_subcommand("train", "Train a model on a manifest dataset");
  std::string train_data, train_out = "train-run", train_config, train_resume, train_mode;
  double train_lr = 0.0, train_momentum = -1.0;
  int train_epochs = 0, train_batch = 0;
  std::int64_t train_seed = -1;
  train->add_option("--data", train_data, "Manifest file")->required();
  train->add_option("--config", train_config, "Config file (flat key = value)");
  train->add_option("--mode", train_mode, "linear or mgda-ub");
  train->add_option("--lr", train_lr, "Initial learning rate");
  train->add_option("--momentum", train_momentum, "SGD momentum");
  train->add_option("--epochs", train_epochs, "Number of epochs");
  train->add_option("--batch-size", train_batch, "Batch size");
  train->add_option("--seed", train_seed, "Master seed");
  train->add_option("--resume", train_resume, "Resume from a checkpoint");
  train->add_option("--out", train_out, "Output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against a manifest");
  std::string eval_ckpt, eval_data, eval_out = "eval-run", eval_pre = "pad-rescale";
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--data", eval_data, "Manifest file")->required();
  eval->add_option("--preprocessing", eval_pre, "pad-rescale, mp or mp-gp");
  eval->add_option("--out", eval_out, "Output directory");

  // predict
  auto* predict = app.add_subcommand("predict", "Predict score distributions");
  std::string pred_ckpt, pred_data, pred_out = "predict-run", pred_pre = "pad-rescale";
  std::vector<std::string> pred_images;
  predict->add_option("--checkpoint", pred_ckpt, "Checkpoint file")->required();
  predict->add_option("--data", pred_data, "Manifest file");
  predict->add_option("--images", pred_images, "Image files");
  predict->add_option("--preprocessing", pred_pre, "pad-rescale, mp or mp-gp");
  predict->add_option("--out", pred_out, "Output directory");

  // verify
  auto* verify = app.add_subcommand("verify", "Run the numeric verification suites");
  std::string verify_only, verify_fault;
  std::uint64_t verify_seed = 20240915;
  bool verify_list = false;
  verify->add_option("--only", verify_only, "Run a single suite");
  verify->add_option("--seed", verify_seed, "Random seed for the suites");
  verify->add_option("--inject-fault", verify_fault,
                     "Testing hook: corrupt the named suite's gradients");
  verify->add_flag("--list", verify_list, "List available suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_n, synth_seed, synth_dim, synth_noise, synth_corr, synth_width,
                       synth_out);
    }
    if (train->parsed()) {
      TrainSetup setup;
      if (!train_config.empty()) load_config_file(setup, train_config);
      if (train->count("--mode") > 0) setup.config.mode = mtaa::train_mode_from_string(train_mode);
      if (train->count("--lr") > 0) setup.config.lr = train_lr;
      if (train->count("--momentum") > 0) setup.config.momentum = train_momentum;
      if (train->count("--epochs") > 0) setup.config.epochs = train_epochs;
      if (train->count("--batch-size") > 0) setup.config.batch_size = train_batch;
      if (train->count("--seed") > 0) setup.config.seed = static_cast<std::uint64_t>(train_seed);
      return cmd_train(setup, train_data, train_out, train_resume);
    }
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_pre, eval_out);
    if (predict->parsed()) {
      return cmd_predict(pred_ckpt, pred_data, pred_images, pred_pre, pred_out);
    }
    if (verify->parsed()) return cmd_verify(verify_only, verify_seed, verify_fault, verify_list);
  } catch (const mtaa::NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const mtaa::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mtaa::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mtaa::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
