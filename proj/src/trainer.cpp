#include "mtaa/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mtaa {

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "linear") return TrainMode::kLinear;
  if (name == "mgda-ub") return TrainMode::kMgdaUb;
  throw InvalidInput("unknown mode '" + name + "' (expected linear or mgda-ub)");
}

std::string to_string(TrainMode mode) {
  return mode == TrainMode::kLinear ? "linear" : "mgda-ub";
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidInput("TrainConfig: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw InvalidInput("TrainConfig: momentum must lie in [0, 1)");
  }
  if (epochs < 1) throw InvalidInput("TrainConfig: epochs must be at least 1");
  if (batch_size < 1) throw InvalidInput("TrainConfig: batch_size must be at least 1");
  if (lr_halve_every < 1) throw InvalidInput("TrainConfig: lr_halve_every must be at least 1");
  if (delta_every < 1) throw InvalidInput("TrainConfig: delta_every must be at least 1");
  emd.validate();
  arch.validate();
  split.validate();
  if (linear_weights.size() != 0) {
    if (linear_weights.size() != arch.num_tasks) {
      throw InvalidInput("TrainConfig: linear_weights length must equal the task count");
    }
    TaskWeights::FromVector(linear_weights);
  }
}

TaskWeights TrainConfig::linear_task_weights() const {
  if (linear_weights.size() == 0) return TaskWeights::Uniform(arch.num_tasks);
  return TaskWeights::FromVector(linear_weights);
}

double lr_at_epoch(double lr0, int halve_every, int epoch) {
  if (epoch < 1) throw InvalidInput("lr_at_epoch: epochs are 1-based");
  return lr0 * std::pow(0.5, (epoch - 1) / halve_every);
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double_field(const std::string& s, long line_no) {
  double v;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("train log: bad number '" + s + "'", line_no);
  }
  return v;
}

std::vector<double> per_task_losses(const ModelParams& params, const SampleBatch& batch,
                                    const EmdConfig& cfg) {
  const Mat reps = encode(params, batch.features);
  std::vector<double> losses(params.arch.num_tasks, 0.0);
  for (int t = 0; t < params.arch.num_tasks; ++t) {
    const Mat logits = head_forward(params, t, reps);
    double acc = 0.0;
    for (int i = 0; i < batch.size(); ++i) {
      const ScoreDistribution y(batch.targets[t].row(i).transpose());
      acc += emd_loss(y, ScoreDistribution::FromLogits(logits.row(i).transpose()), cfg);
    }
    losses[t] = acc / batch.size();
  }
  return losses;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / v.size();
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& dataset, const Checkpoint* resume_from) {
  config.validate();
  if (dataset.size() == 0) throw InvalidInput("train: empty dataset");
  if (dataset.feature_dim() != config.arch.input_dim) {
    throw InvalidInput("train: dataset feature dim " + std::to_string(dataset.feature_dim()) +
                       " does not match architecture input " +
                       std::to_string(config.arch.input_dim));
  }

  const SplitIndices idx = split_indices(dataset.size(), config.split);
  if (idx.train.empty() || idx.val.empty()) {
    throw InvalidInput("train: split leaves an empty train or validation set");
  }
  const SampleBatch val_batch = dataset.make_batch(idx.val);

  const int T = config.arch.num_tasks;
  ModelParams params = [&] {
    if (resume_from != nullptr) {
      if (!(resume_from->params.arch == config.arch)) {
        throw InvalidInput("train: resume checkpoint architecture does not match config");
      }
      return resume_from->params;
    }
    Rng init_rng(Rng::derive(config.seed, "init"));
    return ModelParams::Init(config.arch, init_rng);
  }();

  MomentumState momentum_state = MomentumState::Zeros(config.arch);
  int start_epoch = 1;
  double best_val = std::numeric_limits<double>::infinity();
  if (resume_from != nullptr && resume_from->trainer.has_value()) {
    const TrainerState& st = *resume_from->trainer;
    start_epoch = st.epoch + 1;
    best_val = st.best_val;
    if (st.vel_shared.size() == momentum_state.shared.size()) momentum_state.shared = st.vel_shared;
    for (int t = 0; t < T && t < static_cast<int>(st.vel_heads.size()); ++t) {
      if (st.vel_heads[t].size() == momentum_state.heads[t].size()) {
        momentum_state.heads[t] = st.vel_heads[t];
      }
    }
  }

  TrainResult result;
  result.log.mode = config.mode;
  result.params = params;
  result.best_epoch = 0;

  Rng shuffle_rng(Rng::derive(config.seed, "shuffle"));
  std::vector<int> train_order = idx.train;
  const TaskWeights linear_w =
      config.mode == TrainMode::kLinear ? config.linear_task_weights() : TaskWeights::Uniform(T);

  ModelParams last_good = params;
  bool aborted = false;
  int epoch = start_epoch;
  long global_step = 0;
  TaskWeights current_delta = linear_w;

  for (; epoch <= config.epochs && !aborted; ++epoch) {
    const double lr = lr_at_epoch(config.lr, config.lr_halve_every, epoch);

    // fresh seeded permutation each epoch
    for (int i = static_cast<int>(train_order.size()) - 1; i > 0; --i) {
      std::swap(train_order[i], train_order[shuffle_rng.uniform_int(i + 1)]);
    }

    std::vector<double> epoch_loss(T, 0.0);
    int steps = 0;
    std::vector<double> val_losses;
    try {
      for (std::size_t pos = 0; pos < train_order.size(); pos += config.batch_size) {
        const std::size_t end = std::min(pos + config.batch_size, train_order.size());
        const std::vector<int> batch_idx(train_order.begin() + pos, train_order.begin() + end);
        const SampleBatch batch = dataset.make_batch(batch_idx);

        const ForwardState state = forward_backward_all(params, batch, config.emd);
        if (config.mode == TrainMode::kMgdaUb) {
          if (global_step % config.delta_every == 0) {
            const SolverReport report = frank_wolfe_min_norm(state.representation_gradients());
            current_delta = report.delta;
            TrainLog::DeltaRow row;
            row.epoch = epoch;
            row.step = steps;
            row.delta = report.delta.delta;
            row.combined_norm = report.combined_norm;
            row.iterations = report.iterations;
            row.converged = report.converged;
            result.log.deltas.push_back(std::move(row));
          }
        } else {
          current_delta = linear_w;
        }
        descend(params, state, current_delta, lr, config.momentum, momentum_state);

        const std::vector<double> losses = state.losses();
        for (int t = 0; t < T; ++t) epoch_loss[t] += losses[t];
        ++steps;
        ++global_step;
        last_good = params;
      }
      val_losses = per_task_losses(params, val_batch, config.emd);
    } catch (const NumericFailure&) {
      aborted = true;
      params = last_good;
      if (steps == 0) break;
      try {
        val_losses = per_task_losses(params, val_batch, config.emd);
      } catch (const NumericFailure&) {
        break;
      }
    }
    for (double& l : epoch_loss) l /= std::max(1, steps);

    TrainLog::EpochRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_emd = epoch_loss;
    row.val_emd = val_losses;
    result.log.epochs.push_back(std::move(row));

    const double mean_val = mean_of(val_losses);
    if (mean_val < best_val) {
      best_val = mean_val;
      result.params = params;
      result.best_epoch = epoch;
    }
    if (aborted) break;
  }

  result.aborted = aborted;
  result.log.aborted = aborted;
  result.best_val = best_val;
  result.log.best_epoch = result.best_epoch;
  result.final_state.epoch = std::min(epoch - 1, config.epochs);
  result.final_state.best_val = best_val;
  result.final_state.vel_shared = momentum_state.shared;
  result.final_state.vel_heads = momentum_state.heads;
  return result;
}

std::string format_train_log(const TrainLog& log) {
  std::ostringstream os;
  os << "# mtaa train log v1\n";
  os << "mode," << to_string(log.mode) << "\n";
  os << "aborted," << (log.aborted ? 1 : 0) << "\n";
  os << "best_epoch," << log.best_epoch << "\n";
  for (const TrainLog::EpochRow& row : log.epochs) {
    os << "epoch," << row.epoch << "," << fmt_double(row.lr);
    for (double v : row.train_emd) os << "," << fmt_double(v);
    for (double v : row.val_emd) os << "," << fmt_double(v);
    os << "\n";
  }
  for (const TrainLog::DeltaRow& row : log.deltas) {
    os << "delta," << row.epoch << "," << row.step;
    for (int t = 0; t < row.delta.size(); ++t) os << "," << fmt_double(row.delta[t]);
    os << "," << fmt_double(row.combined_norm) << "," << row.iterations << ","
       << (row.converged ? 1 : 0) << "\n";
  }
  return os.str();
}

TrainLog parse_train_log(const std::string& text) {
  TrainLog log;
  std::istringstream is(text);
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields[0] == "mode") {
      log.mode = train_mode_from_string(fields.at(1));
    } else if (fields[0] == "aborted") {
      log.aborted = fields.at(1) == "1";
    } else if (fields[0] == "best_epoch") {
      log.best_epoch = static_cast<int>(parse_double_field(fields.at(1), line_no));
    } else if (fields[0] == "epoch") {
      if (fields.size() < 3 || (fields.size() - 3) % 2 != 0) {
        throw ParseError("train log: malformed epoch row", line_no);
      }
      TrainLog::EpochRow row;
      row.epoch = static_cast<int>(parse_double_field(fields[1], line_no));
      row.lr = parse_double_field(fields[2], line_no);
      const std::size_t tasks = (fields.size() - 3) / 2;
      for (std::size_t t = 0; t < tasks; ++t) {
        row.train_emd.push_back(parse_double_field(fields[3 + t], line_no));
      }
      for (std::size_t t = 0; t < tasks; ++t) {
        row.val_emd.push_back(parse_double_field(fields[3 + tasks + t], line_no));
      }
      log.epochs.push_back(std::move(row));
    } else if (fields[0] == "delta") {
      if (fields.size() < 7) throw ParseError("train log: malformed delta row", line_no);
      TrainLog::DeltaRow row;
      row.epoch = static_cast<int>(parse_double_field(fields[1], line_no));
      row.step = static_cast<int>(parse_double_field(fields[2], line_no));
      const std::size_t tasks = fields.size() - 6;
      row.delta = Vec(tasks);
      for (std::size_t t = 0; t < tasks; ++t) {
        row.delta[t] = parse_double_field(fields[3 + t], line_no);
      }
      row.combined_norm = parse_double_field(fields[3 + tasks], line_no);
      row.iterations = static_cast<int>(parse_double_field(fields[4 + tasks], line_no));
      row.converged = fields[5 + tasks] == "1";
      log.deltas.push_back(std::move(row));
    } else {
      throw ParseError("train log: unknown row kind '" + fields[0] + "'", line_no);
    }
  }
  return log;
}

void save_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open train log for writing: " + path.string());
  os << format_train_log(log);
  if (!os) throw IoError("failed writing train log: " + path.string());
}

TrainLog load_train_log(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open train log: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_train_log(buf.str());
}

std::vector<std::vector<ScoreDistribution>> predict_features(const ModelParams& params,
                                                             const Mat& features) {
  const Mat reps = encode(params, features);
  std::vector<std::vector<ScoreDistribution>> out(features.rows());
  for (int t = 0; t < params.arch.num_tasks; ++t) {
    const Mat logits = head_forward(params, t, reps);
    for (int i = 0; i < logits.rows(); ++i) {
      out[i].push_back(ScoreDistribution::FromLogits(logits.row(i).transpose()));
    }
  }
  return out;
}

std::vector<SampleRecord> predict_records(const ModelParams& params, const Dataset& dataset) {
  if (params.arch.num_tasks != 4) {
    throw InvalidInput("predict_records: checkpoint must carry all four task heads");
  }
  if (dataset.size() == 0) return {};
  const auto row_preds = predict_features(params, dataset.features);

  // Pool patch rows back onto their base record (ids carry a '#p<k>' suffix).
  std::vector<SampleRecord> out;
  std::map<std::string, std::size_t> by_base;
  std::vector<std::array<Vec, 4>> sums;
  std::vector<int> counts;
  for (int i = 0; i < dataset.size(); ++i) {
    std::string base = dataset.records[i].id;
    if (const auto cut = base.find("#p"); cut != std::string::npos) base.resize(cut);
    auto [it, inserted] = by_base.try_emplace(base, out.size());
    if (inserted) {
      SampleRecord rec;
      rec.id = base;
      rec.source = dataset.records[i].source;
      out.push_back(std::move(rec));
      sums.push_back({Vec::Zero(kNumLevels), Vec::Zero(kNumLevels), Vec::Zero(kNumLevels),
                      Vec::Zero(kNumLevels)});
      counts.push_back(0);
    }
    const std::size_t slot = it->second;
    for (int t = 0; t < 4; ++t) sums[slot][t] += row_preds[i][t].probs();
    counts[slot] += 1;
  }
  for (std::size_t slot = 0; slot < out.size(); ++slot) {
    for (int t = 0; t < 4; ++t) {
      Vec mean = sums[slot][t] / counts[slot];
      mean /= mean.sum();
      out[slot].targets.emplace_back(mean);
    }
  }
  return out;
}

}  // namespace mtaa
