#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "straycomp/adam.hpp"
#include "straycomp/core.hpp"
#include "straycomp/instrument.hpp"

namespace straycomp {

//---------------------------------------------------------------------------//
// Move constraint
//---------------------------------------------------------------------------//

/// Largest allowed excursion of one channel from `previous`.
inline double move_limit(double previous, double fraction, double quantum) {
  return std::max(fraction * std::abs(previous), quantum);
}

/// Clips `candidate` so no channel moves more than move_limit() from
/// `previous`, then snaps to the grid without leaving the allowed interval.
inline ControlVector clip_move(const ControlVector& previous, const ControlVector& candidate,
                               double fraction, const ParameterSpace& space) {
  ControlVector out;
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    const double q = space.quantum[i];
    const double limit = move_limit(previous[i], fraction, q);
    const double lo = std::max(previous[i] - limit, space.lower[i]);
    const double hi = std::min(previous[i] + limit, space.upper[i]);
    const double k_lo = std::ceil(lo / q - 1e-9);
    const double k_hi = std::floor(hi / q + 1e-9);
    double k = std::nearbyint(std::clamp(candidate[i], lo, hi) / q);
    if (k_lo <= k_hi) k = std::clamp(k, k_lo, k_hi);
    out[i] = space.quantize(i, k * q);
  }
  return out;
}

/// True when every channel of `next` is within move_limit() of `previous`.
inline bool within_move(const ControlVector& previous, const ControlVector& next, double fraction,
                        const ParameterSpace& space) {
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    const double limit = move_limit(previous[i], fraction, space.quantum[i]);
    if (std::abs(next[i] - previous[i]) > limit * (1.0 + 1e-9) + 1e-12) return false;
  }
  return true;
}

//---------------------------------------------------------------------------//
// Samples
//---------------------------------------------------------------------------//

enum class SampleSource { de, nn };

inline const char* to_string(SampleSource s) { return s == SampleSource::de ? "DE" : "NN"; }

struct SampleRow {
  ControlVector v;
  std::uint64_t counts = 0;
  double integration_time = 0.1;
  double time = 0.0;
  SampleSource source = SampleSource::de;

  double rate() const { return static_cast<double>(counts) / integration_time; }
};

/// Affine map from raw inputs and rates to the network's standardized units.
struct Normalization {
  ParamArray x_mean{};
  ParamArray x_scale{};
  double y_mean = 0.0;
  double y_scale = 1.0;

  Normalization() { x_scale.fill(1.0); }
};

/// Append-only record of every evaluated setting.
class SampleStore {
 public:
  void append(const SampleRow& r) { rows_.push_back(r); }
  const std::vector<SampleRow>& rows() const { return rows_; }
  const SampleRow& operator[](std::size_t i) const { return rows_[i]; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  /// Highest-rate row; first occurrence wins ties.
  std::size_t best_index() const {
    if (rows_.empty()) throw std::logic_error("SampleStore: empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows_.size(); ++i) {
      if (rows_[i].rate() > rows_[best].rate()) best = i;
    }
    return best;
  }
  const SampleRow& best() const { return rows_[best_index()]; }

  /// Indices of the `k` highest-rate rows, best first.
  std::vector<std::size_t> top(std::size_t k) const {
    std::vector<std::size_t> idx(rows_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return rows_[a].rate() > rows_[b].rate() || (rows_[a].rate() == rows_[b].rate() && a < b);
                      });
    idx.resize(k);
    return idx;
  }

  /// Zero mean, unit variance per input and for the rate; constant columns keep scale 1.
  Normalization normalization() const {
    Normalization n;
    if (rows_.empty()) return n;
    const double count = static_cast<double>(rows_.size());
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      double mean = 0.0;
      for (const auto& r : rows_) mean += r.v[i];
      mean /= count;
      double var = 0.0;
      for (const auto& r : rows_) var += (r.v[i] - mean) * (r.v[i] - mean);
      var /= count;
      n.x_mean[i] = mean;
      n.x_scale[i] = var > 0 ? std::sqrt(var) : 1.0;
    }
    double mean = 0.0;
    for (const auto& r : rows_) mean += r.rate();
    mean /= count;
    double var = 0.0;
    for (const auto& r : rows_) var += (r.rate() - mean) * (r.rate() - mean);
    var /= count;
    n.y_mean = mean;
    n.y_scale = var > 0 ? std::sqrt(var) : 1.0;
    return n;
  }

 private:
  std::vector<SampleRow> rows_;
};

//---------------------------------------------------------------------------//
// Differential evolution
//---------------------------------------------------------------------------//

struct DEConfig {
  int population_size = 15;
  double differential_weight = 0.7;  // F
  double crossover_rate = 0.7;  // CR
  double max_move_fraction = 0.01;
  int warmup_samples = 100;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("surrogate: ") + what);
    };
    require(population_size >= 4, "population_size must be >= 4");
    require(differential_weight > 0 && differential_weight < 2, "differential_weight must be in (0, 2)");
    require(crossover_rate > 0 && crossover_rate <= 1, "crossover_rate must be in (0, 1]");
    require(max_move_fraction > 0, "max_move_fraction must be > 0");
    require(warmup_samples >= population_size, "warmup_samples must be >= population_size");
  }
};

/// DE/rand/1/bin trial: mutant a + F (b - c), binomial crossover with `target`.
/// One coordinate drawn uniformly always comes from the mutant.
template <class Rng>
ControlVector de_candidate(const ControlVector& target, const ControlVector& a, const ControlVector& b,
                           const ControlVector& c, double f, double cr, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kParameterCount - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t forced = pick(rng);
  ControlVector out;
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    const double mutant = a[i] + f * (b[i] - c[i]);
    out[i] = (i == forced || u(rng) < cr) ? mutant : target[i];
  }
  return out;
}

/// Population with one-to-one trial-versus-target selection. Targets are
/// visited round-robin.
struct DEPopulation {
  std::vector<ControlVector> members;
  std::vector<double> fitness;
  std::size_t next_target = 0;

  std::size_t size() const { return members.size(); }

  void add(const ControlVector& v, double rate) {
    members.push_back(v);
    fitness.push_back(rate);
  }
  /// Greedy selection: the trial replaces its target when it is at least as good.
  void select(std::size_t target, const ControlVector& trial, double rate) {
    if (rate >= fitness[target]) {
      members[target] = trial;
      fitness[target] = rate;
    }
  }
  /// Lets an externally found point (a surrogate proposal) displace the worst member.
  void offer(const ControlVector& v, double rate) {
    const auto worst = static_cast<std::size_t>(
        std::distance(fitness.begin(), std::min_element(fitness.begin(), fitness.end())));
    if (rate > fitness[worst]) {
      members[worst] = v;
      fitness[worst] = rate;
    }
  }
};

struct DEProposal {
  ControlVector v;
  std::size_t target = 0;
};

/// Next DE trial, clipped to the move budget around `current` and quantized.
template <class Rng>
DEProposal de_propose(DEPopulation& pop, const ControlVector& current, const DEConfig& cfg,
                      const ParameterSpace& space, Rng& rng) {
  const std::size_t n = pop.size();
  if (n < 4) throw std::logic_error("de_propose: population needs >= 4 members");
  const std::size_t target = pop.next_target;
  pop.next_target = (pop.next_target + 1) % n;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t idx[3];
  for (int k = 0; k < 3; ++k) {
    std::size_t j;
    do {
      j = pick(rng);
    } while (j == target || std::find(idx, idx + k, j) != idx + k);
    idx[k] = j;
  }
  const ControlVector trial = de_candidate(pop.members[target], pop.members[idx[0]], pop.members[idx[1]],
                                           pop.members[idx[2]], cfg.differential_weight, cfg.crossover_rate, rng);
  return {clip_move(current, trial, cfg.max_move_fraction, space), target};
}

//---------------------------------------------------------------------------//
// Surrogate network
//---------------------------------------------------------------------------//

/// Fully connected regressor 45 -> 5 x 45 tanh -> 1 on standardized inputs.
class SurrogateNet {
 public:
  static constexpr int kInputs = static_cast<int>(kParameterCount);
  static constexpr int kHiddenLayers = 5;
  static constexpr int kWidth = 45;
  static constexpr int kLayers = kHiddenLayers + 1;  // weight layers

  Normalization transform;
  double noise_sigma = 0.0;  // counts/s; <= 0 means unit weight in standardized units

  /// All weights and biases zero: constant output equal to the rate mean.
  SurrogateNet() {
    std::size_t offset = 0;
    for (int l = 0; l < kLayers; ++l) {
      layers_[l] = {fan_out(l), fan_in(l), offset};
      offset += static_cast<std::size_t>(fan_out(l)) * static_cast<std::size_t>(fan_in(l) + 1);
    }
    params_.assign(offset, 0.0);
  }

  static constexpr int fan_in(int l) { return l == 0 ? kInputs : kWidth; }
  static constexpr int fan_out(int l) { return l == kLayers - 1 ? 1 : kWidth; }

  /// Glorot-uniform weights scaled by `gain`, zero biases.
  template <class Rng>
  static SurrogateNet xavier(Rng& rng, double gain = 1.0, double output_gain = 1.0) {
    SurrogateNet net;
    for (int l = 0; l < kLayers; ++l) {
      const double a = (l == kLayers - 1 ? output_gain : gain) * std::sqrt(6.0 / (fan_in(l) + fan_out(l)));
      std::uniform_real_distribution<double> u(-a, a);
      auto w = net.weights(l);
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
    }
    return net;
  }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> weights(int l) {
    return {params_.data() + layers_[l].offset, layers_[l].rows, layers_[l].cols};
  }
  Eigen::Map<const Eigen::MatrixXd> weights(int l) const {
    return {params_.data() + layers_[l].offset, layers_[l].rows, layers_[l].cols};
  }
  Eigen::Map<Eigen::VectorXd> bias(int l) {
    return {params_.data() + layers_[l].offset + layers_[l].rows * layers_[l].cols, layers_[l].rows};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int l) const {
    return {params_.data() + layers_[l].offset + layers_[l].rows * layers_[l].cols, layers_[l].rows};
  }

  bool finite() const {
    return std::all_of(params_.begin(), params_.end(), [](double x) { return std::isfinite(x); });
  }

  /// Standardized output for a batch of standardized inputs (one column each).
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& z) const {
    Eigen::MatrixXd a = z;
    for (int l = 0; l < kLayers - 1; ++l) {
      a = ((weights(l) * a).colwise() + bias(l)).array().tanh().matrix();
    }
    return (weights(kLayers - 1) * a).array() + bias(kLayers - 1)(0);
  }

  /// Loss on a standardized batch and, if `grad` is non-null, its gradient
  /// with respect to parameters(). The loss is the Gaussian negative
  /// log-likelihood with fixed sigma (mean r^2 / 2 sigma^2) plus the
  /// weight prior (prior / 2) |W|^2.
  double loss(const Eigen::MatrixXd& z, const Eigen::RowVectorXd& y, double prior,
              std::vector<double>* grad) const {
    const double sigma = sigma_standardized();
    const double inv_var = 1.0 / (sigma * sigma);
    const auto batch = static_cast<double>(z.cols());
    std::array<Eigen::MatrixXd, kLayers> acts;  // inputs to each layer
    acts[0] = z;
    for (int l = 0; l < kLayers - 1; ++l) {
      acts[l + 1] = ((weights(l) * acts[l]).colwise() + bias(l)).array().tanh().matrix();
    }
    const Eigen::RowVectorXd out =
        (weights(kLayers - 1) * acts[kLayers - 1]).array() + bias(kLayers - 1)(0);
    const Eigen::RowVectorXd r = out - y;
    double value = 0.5 * inv_var * r.squaredNorm() / batch;
    const double decay = prior;
    for (int l = 0; l < kLayers; ++l) value += 0.5 * decay * weights(l).squaredNorm();
    if (grad == nullptr) return value;

    grad->assign(params_.size(), 0.0);
    Eigen::MatrixXd delta = (inv_var / batch) * r;  // d loss / d pre-activation, top layer
    for (int l = kLayers - 1; l >= 0; --l) {
      Eigen::Map<Eigen::MatrixXd> gw(grad->data() + layers_[l].offset, layers_[l].rows, layers_[l].cols);
      Eigen::Map<Eigen::VectorXd> gb(grad->data() + layers_[l].offset + layers_[l].rows * layers_[l].cols,
                                     layers_[l].rows);
      gw.noalias() = delta * acts[l].transpose();
      gw += decay * weights(l);
      gb = delta.rowwise().sum();
      if (l > 0) {
        Eigen::MatrixXd back = weights(l).transpose() * delta;
        delta = back.array() * (1.0 - acts[l].array().square());
      }
    }
    return value;
  }

  Eigen::VectorXd standardize(const ControlVector& v) const {
    Eigen::VectorXd z(kInputs);
    for (int i = 0; i < kInputs; ++i) {
      const auto k = static_cast<std::size_t>(i);
      z(i) = (v[k] - transform.x_mean[k]) / transform.x_scale[k];
    }
    return z;
  }

  /// Predicted rate (counts/s).
  double predict(const ControlVector& v) const {
    return transform.y_mean + transform.y_scale * forward(standardize(v))(0);
  }

  /// d predict / d v in raw units.
  ParamArray gradient(const ControlVector& v) const {
    std::array<Eigen::VectorXd, kLayers> acts;
    acts[0] = standardize(v);
    for (int l = 0; l < kLayers - 1; ++l) {
      acts[l + 1] = (weights(l) * acts[l] + bias(l)).array().tanh().matrix();
    }
    Eigen::VectorXd delta = Eigen::VectorXd::Ones(1);
    for (int l = kLayers - 1; l >= 0; --l) {
      Eigen::VectorXd back = weights(l).transpose() * delta;
      delta = l > 0 ? Eigen::VectorXd(back.array() * (1.0 - acts[l].array().square())) : back;
    }
    ParamArray g{};
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      g[i] = transform.y_scale * delta(static_cast<Eigen::Index>(i)) / transform.x_scale[i];
    }
    return g;
  }

  double sigma_standardized() const {
    return noise_sigma > 0 ? noise_sigma / transform.y_scale : 1.0;
  }

  /// Flat text: a header with layer sizes, the normalization, then each
  /// layer's weights row-major followed by its biases.
  std::string serialize() const {
    std::string out = "surrogate-net 1\nlayers";
    for (int l = 0; l < kLayers; ++l) out += " " + std::to_string(fan_in(l));
    out += " 1\nnoise_sigma " + format(noise_sigma) + "\nx_mean";
    for (double x : transform.x_mean) out += " " + format(x);
    out += "\nx_scale";
    for (double x : transform.x_scale) out += " " + format(x);
    out += "\ny " + format(transform.y_mean) + " " + format(transform.y_scale) + "\n";
    for (int l = 0; l < kLayers; ++l) {
      const auto w = weights(l);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) out += (c ? " " : "") + format(w(r, c));
        out += "\n";
      }
      const auto b = bias(l);
      for (Eigen::Index r = 0; r < b.size(); ++r) out += (r ? " " : "") + format(b(r));
      out += "\n";
    }
    return out;
  }

  static SurrogateNet parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    auto fail = [](const std::string& what) -> void { throw std::invalid_argument("surrogate net: " + what); };
    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != "surrogate-net" || version != 1) fail("bad header");
    if (!(in >> word) || word != "layers") fail("missing layer sizes");
    for (int l = 0; l <= kLayers; ++l) {
      int size = 0;
      const int expected = l < kLayers ? fan_in(l) : 1;
      if (!(in >> size) || size != expected) fail("layer sizes must be 45 45 45 45 45 45 1");
    }
    SurrogateNet net;
    auto number = [&](double& x) {
      std::string tok;
      if (!(in >> tok)) fail("truncated");
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) fail("bad number '" + tok + "'");
    };
    auto keyword = [&](const char* k) {
      if (!(in >> word) || word != k) fail(std::string("expected ") + k);
    };
    keyword("noise_sigma");
    number(net.noise_sigma);
    keyword("x_mean");
    for (auto& x : net.transform.x_mean) number(x);
    keyword("x_scale");
    for (auto& x : net.transform.x_scale) number(x);
    keyword("y");
    number(net.transform.y_mean);
    number(net.transform.y_scale);
    for (int l = 0; l < kLayers; ++l) {
      auto w = net.weights(l);
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) number(w(r, c));
      auto b = net.bias(l);
      for (Eigen::Index r = 0; r < b.size(); ++r) number(b(r));
    }
    if (in >> word) fail("trailing content");
    if (!net.finite()) fail("non-finite weights");
    return net;
  }

 private:
  struct Layer {
    Eigen::Index rows = 0, cols = 0;
    std::size_t offset = 0;
  };
  std::array<Layer, kLayers> layers_{};
  std::vector<double> params_;

  static std::string format(double x) { return format_number(x); }
};

//---------------------------------------------------------------------------//
// Training
//---------------------------------------------------------------------------//

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 1e-3;
  double weight_prior = 1e-4;  // Gaussian prior precision on weights
  double final_rate_fraction = 0.1;  // learning rate at the last epoch relative to the first, cosine schedule
  int min_rows = 100;
};

struct TrainingReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;  // full-batch loss after each epoch
};

namespace detail {

inline void standardized_data(const SampleStore& store, const Normalization& n, Eigen::MatrixXd& z,
                              Eigen::RowVectorXd& y) {
  const auto rows = static_cast<Eigen::Index>(store.size());
  z.resize(SurrogateNet::kInputs, rows);
  y.resize(rows);
  for (Eigen::Index c = 0; c < rows; ++c) {
    const auto& r = store[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      z(static_cast<Eigen::Index>(i), c) = (r.v[i] - n.x_mean[i]) / n.x_scale[i];
    }
    y(c) = (r.rate() - n.y_mean) / n.y_scale;
  }
}

}  // namespace detail

/// Mini-batch ADAM on the store's standardized data. The net's normalization
/// is refreshed from the store; its weights are the warm start.
template <class Rng>
SurrogateNet train_surrogate(const SampleStore& store, SurrogateNet net, int epochs, const TrainConfig& cfg,
                             Rng& rng, TrainingReport* report = nullptr) {
  if (static_cast<int>(store.size()) < cfg.min_rows) {
    throw std::invalid_argument("train_surrogate: need at least " + std::to_string(cfg.min_rows) + " rows, have " +
                                std::to_string(store.size()));
  }
  if (cfg.batch_size < 1 || !(cfg.learning_rate > 0) || epochs < 0) {
    throw std::invalid_argument("train_surrogate: bad training settings");
  }
  net.transform = store.normalization();
  Eigen::MatrixXd z;
  Eigen::RowVectorXd y;
  detail::standardized_data(store, net.transform, z, y);
  if (report) {
    report->initial_loss = net.loss(z, y, cfg.weight_prior, nullptr);
    report->epoch_losses.clear();
  }
  AdamMoments moments(net.parameters().size());
  std::vector<double> alpha{cfg.learning_rate};
  std::vector<double> grad, step(net.parameters().size());
  std::vector<Eigen::Index> order(store.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd zb;
  Eigen::RowVectorXd yb;
  for (int e = 0; e < epochs; ++e) {
    const double phase = epochs > 1 ? static_cast<double>(e) / (epochs - 1) : 0.0;
    alpha[0] = cfg.learning_rate *
               (cfg.final_rate_fraction + (1.0 - cfg.final_rate_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * phase)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      zb.resize(z.rows(), b);
      yb.resize(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        zb.col(k) = z.col(order[start + static_cast<std::size_t>(k)]);
        yb(k) = y(order[start + static_cast<std::size_t>(k)]);
      }
      net.loss(zb, yb, cfg.weight_prior, &grad);
      adam_update(moments, grad, alpha, AdamHyper{}, step);
      auto& p = net.parameters();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step[i];
    }
    if (report) report->epoch_losses.push_back(net.loss(z, y, cfg.weight_prior, nullptr));
  }
  return net;
}

//---------------------------------------------------------------------------//
// Surrogate proposals
//---------------------------------------------------------------------------//

/// Anything with predict() and gradient() in raw units.
template <class M>
concept SurrogateModel = requires(const M& m, const ControlVector& v) {
  { m.predict(v) } -> std::convertible_to<double>;
  { m.gradient(v) } -> std::convertible_to<ParamArray>;
};

struct ProposalConfig {
  double max_move_fraction = 0.01;
  int starts = 4;  // v_current plus the best stored samples
  int ascent_steps = 40;
  double search_reach = 1.0;  // inner-search box half-width in move limits
};

/// Projected gradient ascent with backtracking inside [lo, hi]. Each step moves
/// the free channel with the steepest box-scaled slope by `eta` of its
/// half-width and the others proportionally less. Returns the best end point over all
/// starts, or the first start when nothing improves on it.
template <SurrogateModel M>
ControlVector maximize_in_box(const M& model, const std::vector<ControlVector>& starts, const ParamArray& lo,
                              const ParamArray& hi, int steps) {
  if (starts.empty()) throw std::invalid_argument("maximize_in_box: no starts");
  ParamArray half{};
  for (std::size_t i = 0; i < kParameterCount; ++i) half[i] = 0.5 * (hi[i] - lo[i]);
  auto project = [&](ControlVector v) {
    for (std::size_t i = 0; i < kParameterCount; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
    return v;
  };
  ControlVector best = starts.front();
  double best_value = model.predict(best);
  for (const auto& s : starts) {
    ControlVector x = project(s);
    double fx = model.predict(x);
    double eta = 0.5;
    for (int k = 0; k < steps && eta > 1e-4; ++k) {
      ParamArray g = model.gradient(x);
      double g_max = 0.0;
      for (std::size_t i = 0; i < kParameterCount; ++i) {
        if ((g[i] > 0 && x[i] >= hi[i]) || (g[i] < 0 && x[i] <= lo[i])) g[i] = 0.0;  // pinned at a bound
        g_max = std::max(g_max, std::abs(g[i] * half[i]));
      }
      if (!(g_max > 0) || !std::isfinite(g_max)) break;
      ControlVector trial = x;
      for (std::size_t i = 0; i < kParameterCount; ++i) trial[i] += eta * half[i] * half[i] * g[i] / g_max;
      trial = project(trial);
      const double ft = model.predict(trial);
      if (ft > fx) {
        x = trial;
        fx = ft;
        eta = std::min(1.0, eta * 1.5);
      } else {
        eta *= 0.5;
      }
    }
    if (fx > best_value) {
      best_value = fx;
      best = x;
    }
  }
  return best;
}

/// Maximizes the model inside the move box around `current`, starting from
/// `current` and the best stored samples. Returns the quantized proposal, or
/// `current` when no start beats the model's value there.
template <SurrogateModel M>
ControlVector nn_propose(const M& model, const SampleStore& store, const ControlVector& current,
                         const ProposalConfig& cfg, const ParameterSpace& space) {
  ParamArray lo{}, hi{};
  for (std::size_t i = 0; i < kParameterCount; ++i) {
    const double limit = cfg.search_reach * move_limit(current[i], cfg.max_move_fraction, space.quantum[i]);
    lo[i] = std::max(current[i] - limit, space.lower[i]);
    hi[i] = std::min(current[i] + limit, space.upper[i]);
  }
  std::vector<ControlVector> starts{current};
  for (std::size_t idx : store.top(static_cast<std::size_t>(std::max(0, cfg.starts - 1)))) {
    starts.push_back(store[idx].v);
  }
  return clip_move(current, maximize_in_box(model, starts, lo, hi, cfg.ascent_steps), cfg.max_move_fraction,
                   space);
}

//---------------------------------------------------------------------------//
// Run loop
//---------------------------------------------------------------------------//

struct SurrogateConfig {
  DEConfig de{};
  TrainConfig train{};
  ProposalConfig proposal{};
  int budget = 1000;  // samples, including the starting point
  int retrain_every = 50;  // R
  double nn_share = 0.5;  // fraction of post-warmup samples proposed by the network
  int initial_epochs = 200;
  int retrain_epochs = 20;
  double noise_sigma = 0.0;  // counts/s; <= 0: measure from idle readouts
  int noise_readouts = 20;
  double integration_time = 0.1;
  double sample_overhead = 0.6;  // model seconds per sample beyond the readout
  double abort_fraction = 0.4;
  double search_scale = 1.0;  // widens the DE move budget; > 1 reproduces unstable wide searches

  void validate() const {
    de.validate();
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("surrogate: ") + what);
    };
    require(budget >= 1, "budget must be >= 1");
    require(retrain_every >= 1, "retrain_every must be >= 1");
    require(nn_share >= 0 && nn_share <= 1, "nn_share must be in [0, 1]");
    require(initial_epochs >= 0 && retrain_epochs >= 0, "epochs must be >= 0");
    require(train.batch_size >= 1, "batch_size must be >= 1");
    require(train.learning_rate > 0, "learning_rate must be > 0");
    require(train.weight_prior >= 0, "weight_prior must be >= 0");
    require(train.final_rate_fraction > 0 && train.final_rate_fraction <= 1, "final_rate_fraction must be in (0, 1]");
    require(noise_readouts >= 2 || noise_sigma > 0, "noise_readouts must be >= 2 when noise_sigma is measured");
    require(integration_time > 0, "integration_time must be > 0");
    require(sample_overhead >= 0, "sample_overhead must be >= 0");
    require(abort_fraction > 0 && abort_fraction < 1, "abort_fraction must be in (0, 1)");
    require(search_scale > 0, "search_scale must be > 0");
    require(proposal.starts >= 1 && proposal.ascent_steps >= 0, "bad proposal settings");
    require(proposal.search_reach > 0, "search_reach must be > 0");
  }
};

struct SurrogateResult {
  ControlVector best;
  SampleStore store;
  Termination termination = Termination::completed;
  std::size_t trigger_sample = 0;  // store row that fired the safety net
  int trainings = 0;
  double noise_sigma = 0.0;
  std::vector<TrainingReport> reports;
  SurrogateNet net;
};

struct SurrogateObserver {
  std::function<void(const SampleRow&)> on_sample;
};

/// Global search: DE from a small box around `start`, then DE and surrogate
/// proposals alternately once `warmup_samples` rows exist, retraining every
/// `retrain_every` rows. Each sample moves at most the move budget from the
/// previous one. Stops with the safety net when a sample falls below
/// (1 - abort_fraction) times the first sample; always finishes by applying
/// the best stored setting.
template <Instrument I>
SurrogateResult surrogate_run(I& inst, const ControlVector& start, const ParameterSpace& space,
                              const SurrogateConfig& cfg, std::uint64_t seed = 0,
                              const SurrogateObserver& observer = {}) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  SurrogateResult out;
  const double de_fraction = cfg.de.max_move_fraction * cfg.search_scale;
  DEConfig de_cfg = cfg.de;
  de_cfg.max_move_fraction = de_fraction;
  ProposalConfig prop = cfg.proposal;
  prop.max_move_fraction = cfg.de.max_move_fraction;

  ControlVector current = space.quantize(start);
  inst.apply(current);
  out.noise_sigma = cfg.noise_sigma;
  if (!(out.noise_sigma > 0)) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int k = 0; k < cfg.noise_readouts; ++k) {
      const double r = inst.read(cfg.integration_time).rate();
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    // A flat signal still carries the counter resolution of one count per integration.
    out.noise_sigma = std::max(hi - lo, 1.0 / cfg.integration_time) / std::sqrt(12.0);
  }

  double threshold = 0.0;
  const auto budget = static_cast<std::size_t>(cfg.budget);
  auto evaluate = [&](const ControlVector& v, SampleSource src) {
    current = v;
    inst.apply(v);
    const PhotonReadout r = inst.read(cfg.integration_time);
    SampleRow row{v, r.counts, r.integration_time, inst.time(), src};
    out.store.append(row);
    if (observer.on_sample) observer.on_sample(row);
    inst.advance(cfg.sample_overhead);
    return row.rate();
  };
  SurrogateNet net;
  auto finish = [&](bool aborted) {
    out.net = net;
    if (aborted) {
      out.termination = Termination::safety_net;
      out.trigger_sample = out.store.size() - 1;
    }
    out.best = out.store.best().v;
    inst.apply(out.best);
    return std::move(out);
  };

  DEPopulation pop;
  const double first = evaluate(current, SampleSource::de);
  threshold = (1.0 - cfg.abort_fraction) * first;
  pop.add(current, first);

  // Initial population: a random walk inside the move box around the start.
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const ControlVector origin = current;
  while (pop.size() < static_cast<std::size_t>(cfg.de.population_size) && out.store.size() < budget) {
    ControlVector cand;
    for (std::size_t i = 0; i < kParameterCount; ++i) {
      cand[i] = origin[i] + unit(rng) * move_limit(origin[i], de_fraction, space.quantum[i]);
    }
    cand = clip_move(current, cand, de_fraction, space);
    const double r = evaluate(cand, SampleSource::de);
    pop.add(cand, r);
    if (r < threshold) return finish(true);
  }

  bool trained = false;
  std::size_t trained_at = 0;
  std::mt19937_64 train_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  double nn_credit = 0.0;
  while (out.store.size() < budget) {
    const bool warm = out.store.size() >= static_cast<std::size_t>(cfg.de.warmup_samples);
    if (warm && (!trained || out.store.size() - trained_at >= static_cast<std::size_t>(cfg.retrain_every))) {
      if (!trained) net = SurrogateNet::xavier(train_rng);
      net.noise_sigma = out.noise_sigma;
      TrainConfig tc = cfg.train;
      tc.min_rows = cfg.de.warmup_samples;
      TrainingReport rep;
      net = train_surrogate(out.store, std::move(net), trained ? cfg.retrain_epochs : cfg.initial_epochs, tc,
                            train_rng, &rep);
      out.reports.push_back(std::move(rep));
      ++out.trainings;
      trained = true;
      trained_at = out.store.size();
    }
    bool nn_turn = false;
    if (warm) {
      nn_credit += cfg.nn_share;
      if (nn_credit >= 1.0 - 1e-12) {
        nn_credit -= 1.0;
        nn_turn = true;
      }
    }
    double r;
    if (nn_turn) {
      const ControlVector cand = nn_propose(net, out.store, current, prop, space);
      r = evaluate(cand, SampleSource::nn);
      pop.offer(cand, r);
    } else {
      const auto p = de_propose(pop, current, de_cfg, space, rng);
      r = evaluate(p.v, SampleSource::de);
      pop.select(p.target, p.v, r);
    }
    if (r < threshold) return finish(true);
  }
  return finish(false);
}

}  // namespace straycomp
