#include "mtaa/nn.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace mtaa {

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kReLU;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw InvalidInput("unknown activation '" + name + "' (expected relu, tanh or identity)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kReLU: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  throw InvalidInput("unknown activation enum value");
}

void SampleBatch::validate() const {
  if (features.rows() == 0) throw InvalidInput("SampleBatch: empty batch");
  if (features.minCoeff() < 0.0 || features.maxCoeff() > 1.0) {
    throw InvalidInput("SampleBatch: feature values must lie in [0, 1]");
  }
  if (targets.empty()) throw InvalidInput("SampleBatch: no targets");
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Mat& m = targets[t];
    if (m.rows() != features.rows() || m.cols() != kNumLevels) {
      throw InvalidInput("SampleBatch: target matrix " + std::to_string(t) + " has wrong shape");
    }
    for (int i = 0; i < m.rows(); ++i) {
      ScoreDistribution(m.row(i).transpose());  // throws when invalid
    }
  }
}

void Architecture::validate() const {
  if (input_dim <= 0) throw InvalidInput("Architecture: input_dim must be positive");
  if (latent_dim <= 0) throw InvalidInput("Architecture: latent_dim must be positive");
  if (num_tasks <= 0) throw InvalidInput("Architecture: num_tasks must be positive");
  if (num_levels != kNumLevels) throw InvalidInput("Architecture: num_levels must be 5");
  for (int h : encoder_hidden)
    if (h <= 0) throw InvalidInput("Architecture: encoder hidden sizes must be positive");
  for (int h : head_hidden)
    if (h <= 0) throw InvalidInput("Architecture: head hidden sizes must be positive");
}

std::vector<int> Architecture::encoder_sizes() const {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), encoder_hidden.begin(), encoder_hidden.end());
  sizes.push_back(latent_dim);
  return sizes;
}

std::vector<int> Architecture::head_sizes() const {
  std::vector<int> sizes;
  sizes.push_back(latent_dim);
  sizes.insert(sizes.end(), head_hidden.begin(), head_hidden.end());
  sizes.push_back(num_levels);
  return sizes;
}

namespace {

int mlp_param_count(const std::vector<int>& sizes) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * sizes[l] + sizes[l + 1];
  return n;
}

// Views into a flat parameter vector. Layout per layer: W (out x in,
// column-major), then b (out).
struct LayerView {
  Eigen::Map<const Mat> W;
  Eigen::Map<const Vec> b;
};

LayerView layer_view(const Vec& flat, const std::vector<int>& sizes, int layer, int offset) {
  const int in = sizes[layer], out = sizes[layer + 1];
  return {Eigen::Map<const Mat>(flat.data() + offset, out, in),
          Eigen::Map<const Vec>(flat.data() + offset + out * in, out)};
}

int layer_offset(const std::vector<int>& sizes, int layer) {
  int off = 0;
  for (int l = 0; l < layer; ++l) off += sizes[l + 1] * sizes[l] + sizes[l + 1];
  return off;
}

Mat apply_activation(const Mat& z, Activation act) {
  switch (act) {
    case Activation::kReLU: return z.cwiseMax(0.0);
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kIdentity: return z;
  }
  throw InvalidInput("unknown activation");
}

Mat activation_derivative(const Mat& z, Activation act) {
  switch (act) {
    case Activation::kReLU: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::kIdentity: return Mat::Ones(z.rows(), z.cols());
  }
  throw InvalidInput("unknown activation");
}

void check_finite(const Mat& m, const char* what, int layer) {
  if (!m.allFinite()) {
    throw NumericFailure(std::string(what) + " produced non-finite values at layer " +
                         std::to_string(layer));
  }
}

struct MlpCache {
  std::vector<Mat> inputs;
  std::vector<Mat> preacts;
  Mat output;
};

// Forward through an MLP given by `sizes`; hidden layers use `act`, the last
// layer is linear.
MlpCache mlp_forward(const Vec& flat, const std::vector<int>& sizes, Activation act, const Mat& x,
                     const char* what) {
  const int n_layers = static_cast<int>(sizes.size()) - 1;
  MlpCache cache;
  Mat cur = x;
  int offset = 0;
  for (int l = 0; l < n_layers; ++l) {
    const LayerView lv = layer_view(flat, sizes, l, offset);
    offset += sizes[l + 1] * sizes[l] + sizes[l + 1];
    cache.inputs.push_back(cur);
    Mat z = cur * lv.W.transpose();
    z.rowwise() += lv.b.transpose();
    check_finite(z, what, l);
    cache.preacts.push_back(z);
    cur = (l + 1 < n_layers) ? apply_activation(z, act) : std::move(z);
  }
  cache.output = std::move(cur);
  return cache;
}

// Backward through an MLP. `dout` is the gradient w.r.t. the (linear) output.
// Returns the flat parameter gradient and, through `dinput`, the gradient
// w.r.t. the input batch.
Vec mlp_backward(const Vec& flat, const std::vector<int>& sizes, Activation act,
                 const MlpCache& cache, const Mat& dout, Mat* dinput, const char* what) {
  const int n_layers = static_cast<int>(sizes.size()) - 1;
  Vec grad = Vec::Zero(flat.size());
  Mat delta = dout;
  for (int l = n_layers - 1; l >= 0; --l) {
    if (l + 1 < n_layers) {
      delta = delta.cwiseProduct(activation_derivative(cache.preacts[l], act));
    }
    check_finite(delta, what, l);
    const int in = sizes[l], out = sizes[l + 1];
    const int offset = layer_offset(sizes, l);
    Eigen::Map<Mat>(grad.data() + offset, out, in) = delta.transpose() * cache.inputs[l];
    Eigen::Map<Vec>(grad.data() + offset + out * in, out) = delta.colwise().sum().transpose();
    if (l > 0 || dinput != nullptr) {
      const LayerView lv = layer_view(flat, sizes, l, offset);
      delta = delta * lv.W;
    }
  }
  if (dinput != nullptr) *dinput = std::move(delta);
  return grad;
}

}  // namespace

int Architecture::shared_param_count() const { return mlp_param_count(encoder_sizes()); }
int Architecture::head_param_count() const { return mlp_param_count(head_sizes()); }

ModelParams ModelParams::Zeros(const Architecture& arch) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  p.shared = Vec::Zero(arch.shared_param_count());
  p.heads.assign(arch.num_tasks, Vec::Zero(arch.head_param_count()));
  return p;
}

namespace {

void init_mlp(Vec& flat, const std::vector<int>& sizes, Rng& rng) {
  int offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const double s = std::sqrt(6.0 / (in + out));
    for (int k = 0; k < out * in; ++k) flat[offset + k] = rng.uniform(-s, s);
    // biases stay zero
    offset += out * in + out;
  }
}

}  // namespace

ModelParams ModelParams::Init(const Architecture& arch, Rng& rng) {
  ModelParams p = Zeros(arch);
  init_mlp(p.shared, arch.encoder_sizes(), rng);
  for (int t = 0; t < arch.num_tasks; ++t) init_mlp(p.heads[t], arch.head_sizes(), rng);
  return p;
}

void ModelParams::validate() const {
  arch.validate();
  if (shared.size() != arch.shared_param_count()) {
    throw InvalidInput("ModelParams: shared parameter vector has wrong length");
  }
  if (static_cast<int>(heads.size()) != arch.num_tasks) {
    throw InvalidInput("ModelParams: expected " + std::to_string(arch.num_tasks) + " heads");
  }
  for (const Vec& h : heads) {
    if (h.size() != arch.head_param_count()) {
      throw InvalidInput("ModelParams: head parameter vector has wrong length");
    }
  }
  if (!shared.allFinite()) throw InvalidInput("ModelParams: non-finite shared parameters");
  for (const Vec& h : heads)
    if (!h.allFinite()) throw InvalidInput("ModelParams: non-finite head parameters");
}

void GradientSet::validate() const {
  if (grads.empty()) throw InvalidInput("GradientSet: empty");
  for (const Vec& g : grads) {
    if (g.size() != grads.front().size()) {
      throw InvalidInput("GradientSet: gradient vectors differ in length");
    }
    if (!g.allFinite()) throw InvalidInput("GradientSet: non-finite gradient");
  }
}

EncoderCache encode_with_cache(const ModelParams& params, const Mat& features) {
  if (features.cols() != params.arch.input_dim) {
    throw InvalidInput("encode: feature dimension " + std::to_string(features.cols()) +
                       " does not match architecture input " +
                       std::to_string(params.arch.input_dim));
  }
  MlpCache c =
      mlp_forward(params.shared, params.arch.encoder_sizes(), params.arch.activation, features,
                  "encoder");
  EncoderCache out;
  out.inputs = std::move(c.inputs);
  out.preacts = std::move(c.preacts);
  out.reps = std::move(c.output);
  return out;
}

Mat encode(const ModelParams& params, const Mat& features) {
  return encode_with_cache(params, features).reps;
}

Mat head_forward(const ModelParams& params, int task, const Mat& reps) {
  if (task < 0 || task >= params.arch.num_tasks) {
    throw InvalidInput("head_forward: task index " + std::to_string(task) + " out of range");
  }
  if (reps.cols() != params.arch.latent_dim) {
    throw InvalidInput("head_forward: representation width does not match latent_dim");
  }
  return mlp_forward(params.heads[task], params.arch.head_sizes(), params.arch.activation, reps,
                     "head")
      .output;
}

HeadBackward head_loss_backward(const ModelParams& params, int task, const Mat& reps,
                                const Mat& targets, const EmdConfig& cfg) {
  if (task < 0 || task >= params.arch.num_tasks) {
    throw InvalidInput("head_loss_backward: task index out of range");
  }
  const std::vector<int> sizes = params.arch.head_sizes();
  MlpCache cache =
      mlp_forward(params.heads[task], sizes, params.arch.activation, reps, "head");
  const Mat& logits = cache.output;
  const int batch = static_cast<int>(reps.rows());

  HeadBackward out;
  Mat dlogits(batch, params.arch.num_levels);
  for (int i = 0; i < batch; ++i) {
    const ScoreDistribution y(targets.row(i).transpose());
    const Vec z = logits.row(i).transpose();
    out.loss += emd_loss(y, ScoreDistribution::FromLogits(z), cfg);
    dlogits.row(i) = emd_grad_logits(y, z, cfg).transpose() / batch;
  }
  out.loss /= batch;

  out.head_grad = mlp_backward(params.heads[task], sizes, params.arch.activation, cache, dlogits,
                               &out.rep_grad, "head");
  return out;
}

double task_loss(const ModelParams& params, const SampleBatch& batch, int task,
                 const EmdConfig& cfg) {
  if (task < 0 || task >= static_cast<int>(batch.targets.size())) {
    throw InvalidInput("task_loss: no targets for task " + std::to_string(task));
  }
  const Mat reps = encode(params, batch.features);
  const Mat logits = head_forward(params, task, reps);
  double loss = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    const ScoreDistribution y(batch.targets[task].row(i).transpose());
    loss += emd_loss(y, ScoreDistribution::FromLogits(logits.row(i).transpose()), cfg);
  }
  return loss / batch.size();
}

Vec encoder_backward(const ModelParams& params, const EncoderCache& cache, const Mat& rep_grad) {
  if (rep_grad.rows() != cache.reps.rows() || rep_grad.cols() != cache.reps.cols()) {
    throw InvalidInput("encoder_backward: gradient shape does not match representations");
  }
  MlpCache c;
  c.inputs = cache.inputs;
  c.preacts = cache.preacts;
  return mlp_backward(params.shared, params.arch.encoder_sizes(), params.arch.activation, c,
                      rep_grad, nullptr, "encoder");
}

Vec backward_task(const ModelParams& params, const SampleBatch& batch, int task,
                  const EmdConfig& cfg, GradSpace space) {
  if (task < 0 || task >= static_cast<int>(batch.targets.size())) {
    throw InvalidInput("backward_task: no targets for task " + std::to_string(task));
  }
  const EncoderCache cache = encode_with_cache(params, batch.features);
  const HeadBackward hb = head_loss_backward(params, task, cache.reps, batch.targets[task], cfg);
  if (space == GradSpace::kRepresentation) {
    return Eigen::Map<const Vec>(hb.rep_grad.data(), hb.rep_grad.size());
  }
  return encoder_backward(params, cache, hb.rep_grad);
}

Vec backward_task_head(const ModelParams& params, const SampleBatch& batch, int task,
                       const EmdConfig& cfg) {
  const EncoderCache cache = encode_with_cache(params, batch.features);
  return head_loss_backward(params, task, cache.reps, batch.targets[task], cfg).head_grad;
}

void sgd_momentum_step(Vec& params, Vec& velocity, const Vec& direction, double lr,
                       double momentum) {
  if (params.size() != direction.size() || params.size() != velocity.size()) {
    throw InvalidInput("sgd_momentum_step: dimension mismatch");
  }
  velocity = momentum * velocity + direction;
  params -= lr * velocity;
}

}  // namespace mtaa
