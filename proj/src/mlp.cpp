#include "abmrl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "abmrl/errors.hpp"

namespace abmrl {

Mlp Mlp::make(const std::vector<int>& widths, Activation hidden_act) {
  require(widths.size() >= 2, "Mlp::make: need at least input and output widths");
  Mlp net;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    require(widths[l] > 0 && widths[l + 1] > 0, "Mlp::make: widths must be positive");
    bool last = (l + 2 == widths.size());
    net.layers.push_back({widths[l], widths[l + 1], last ? Activation::kIdentity : hidden_act});
    net.w.emplace_back(static_cast<size_t>(widths[l]) * widths[l + 1], 0.0);
    net.b.emplace_back(widths[l + 1], 0.0);
  }
  return net;
}

int Mlp::param_count() const {
  int n = 0;
  for (size_t l = 0; l < layers.size(); ++l)
    n += static_cast<int>(w[l].size() + b[l].size());
  return n;
}

void Mlp::init_uniform(RngStream& rng) {
  for (size_t l = 0; l < layers.size(); ++l) {
    double scale = 1.0 / std::sqrt(static_cast<double>(layers[l].in));
    for (double& v : w[l]) v = (2.0 * rng.uniform() - 1.0) * scale;
    std::fill(b[l].begin(), b[l].end(), 0.0);
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == input_dim(), "Mlp::forward: input width mismatch");
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    next.assign(spec.out, 0.0);
    const double* wl = w[l].data();
    for (int o = 0; o < spec.out; ++o) {
      double acc = b[l][o];
      const double* row = wl + static_cast<size_t>(o) * spec.in;
      for (int i = 0; i < spec.in; ++i) acc += row[i] * cur[i];
      next[o] = (spec.act == Activation::kTanh) ? std::tanh(acc) : acc;
    }
    cur.swap(next);
  }
  for (double v : cur)
    if (!std::isfinite(v)) throw NumericError("Mlp::forward: non-finite output");
  return cur;
}

MlpGrad MlpGrad::zeros_like(const Mlp& net) {
  MlpGrad g;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    g.w.emplace_back(net.w[l].size(), 0.0);
    g.b.emplace_back(net.b[l].size(), 0.0);
  }
  return g;
}

void MlpGrad::add(const MlpGrad& other, double scale) {
  require(w.size() == other.w.size(), "MlpGrad::add: shape mismatch");
  for (size_t l = 0; l < w.size(); ++l) {
    for (size_t i = 0; i < w[l].size(); ++i) w[l][i] += scale * other.w[l][i];
    for (size_t i = 0; i < b[l].size(); ++i) b[l][i] += scale * other.b[l][i];
  }
}

double MlpGrad::max_abs() const {
  double m = 0.0;
  for (const auto& lw : w)
    for (double v : lw) m = std::max(m, std::fabs(v));
  for (const auto& lb : b)
    for (double v : lb) m = std::max(m, std::fabs(v));
  return m;
}

void axpy(Mlp& net, double alpha, const MlpGrad& grad) {
  require(net.w.size() == grad.w.size(), "axpy: shape mismatch");
  for (size_t l = 0; l < net.w.size(); ++l) {
    require(net.w[l].size() == grad.w[l].size() && net.b[l].size() == grad.b[l].size(),
            "axpy: layer shape mismatch");
    for (size_t i = 0; i < net.w[l].size(); ++i) net.w[l][i] += alpha * grad.w[l][i];
    for (size_t i = 0; i < net.b[l].size(); ++i) net.b[l][i] += alpha * grad.b[l][i];
  }
}

MlpGrad backprop(const Mlp& net, std::span<const double> x, std::span<const double> gout) {
  require(static_cast<int>(x.size()) == net.input_dim(), "backprop: input width mismatch");
  require(static_cast<int>(gout.size()) == net.output_dim(), "backprop: output width mismatch");

  size_t nl = net.layers.size();
  // acts[0] = input, acts[l+1] = post-activation of layer l
  std::vector<std::vector<double>> acts(nl + 1);
  acts[0].assign(x.begin(), x.end());
  for (size_t l = 0; l < nl; ++l) {
    const auto& spec = net.layers[l];
    acts[l + 1].assign(spec.out, 0.0);
    for (int o = 0; o < spec.out; ++o) {
      double acc = net.b[l][o];
      const double* row = net.w[l].data() + static_cast<size_t>(o) * spec.in;
      for (int i = 0; i < spec.in; ++i) acc += row[i] * acts[l][i];
      acts[l + 1][o] = (spec.act == Activation::kTanh) ? std::tanh(acc) : acc;
    }
  }

  MlpGrad g = MlpGrad::zeros_like(net);
  std::vector<double> delta(gout.begin(), gout.end());
  for (size_t li = nl; li-- > 0;) {
    const auto& spec = net.layers[li];
    if (spec.act == Activation::kTanh) {
      for (int o = 0; o < spec.out; ++o) {
        double a = acts[li + 1][o];  // tanh' = 1 - tanh^2
        delta[o] *= 1.0 - a * a;
      }
    }
    for (int o = 0; o < spec.out; ++o) {
      double d = delta[o];
      g.b[li][o] = d;
      double* grow = g.w[li].data() + static_cast<size_t>(o) * spec.in;
      for (int i = 0; i < spec.in; ++i) grow[i] = d * acts[li][i];
    }
    if (li > 0) {
      std::vector<double> prev(spec.in, 0.0);
      for (int o = 0; o < spec.out; ++o) {
        double d = delta[o];
        const double* row = net.w[li].data() + static_cast<size_t>(o) * spec.in;
        for (int i = 0; i < spec.in; ++i) prev[i] += d * row[i];
      }
      delta.swap(prev);
    }
  }
  if (!std::isfinite(g.max_abs())) throw NumericError("backprop: non-finite gradient");
  return g;
}

std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax: empty logits");
  double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

ActionDistribution forward_policy(const Mlp& net, std::span<const double> obs) {
  return ActionDistribution{softmax(net.forward(obs))};
}

double forward_value(const Mlp& net, std::span<const double> obs) {
  require(net.output_dim() == 1, "forward_value: net must have a single output");
  return net.forward(obs)[0];
}

std::pair<int, double> sample_action(const ActionDistribution& dist, RngStream& rng) {
  require(!dist.p.empty(), "sample_action: empty distribution");
  double u = rng.uniform();
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < dist.size(); ++i) {
    if (dist.p[i] > 0.0) last_positive = i;
    acc += dist.p[i];
    if (u < acc) return {i, std::log(dist.p[i])};
  }
  // Rounding pushed the cumulative sum just below 1; take the last live entry.
  return {last_positive, std::log(dist.p[last_positive])};
}

double log_prob(const Mlp& net, std::span<const double> obs, int action) {
  auto logits = net.forward(obs);
  require(action >= 0 && action < static_cast<int>(logits.size()), "log_prob: bad action id");
  double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  return logits[action] - m - std::log(z);
}

MlpGrad policy_log_grad(const Mlp& net, std::span<const double> obs, int action) {
  auto probs = softmax(net.forward(obs));
  require(action >= 0 && action < static_cast<int>(probs.size()),
          "policy_log_grad: bad action id");
  std::vector<double> gout(probs.size());
  for (size_t k = 0; k < probs.size(); ++k) gout[k] = (static_cast<int>(k) == action ? 1.0 : 0.0) - probs[k];
  return backprop(net, obs, gout);
}

namespace {

// Max relative error between analytic and central-difference gradients of a
// scalar loss. The denominator floor keeps fd noise on ~zero entries from
// registering as error.
template <typename Loss>
double grad_check_impl(const Mlp& net, const MlpGrad& analytic, double epsilon, Loss loss) {
  require(epsilon >= 1e-7 && epsilon <= 1e-3, "grad_check: epsilon out of [1e-7, 1e-3]");
  Mlp probe = net;
  double worst = 0.0;
  auto check_one = [&](double& slot, double a) {
    double keep = slot;
    slot = keep + epsilon;
    double up = loss(probe);
    slot = keep - epsilon;
    double down = loss(probe);
    slot = keep;
    double fd = (up - down) / (2.0 * epsilon);
    double denom = std::max({std::fabs(a), std::fabs(fd), 1e-6});
    worst = std::max(worst, std::fabs(a - fd) / denom);
  };
  for (size_t l = 0; l < probe.w.size(); ++l) {
    for (size_t i = 0; i < probe.w[l].size(); ++i) check_one(probe.w[l][i], analytic.w[l][i]);
    for (size_t i = 0; i < probe.b[l].size(); ++i) check_one(probe.b[l][i], analytic.b[l][i]);
  }
  return worst;
}

}  // namespace

double grad_check_policy(const Mlp& net, std::span<const double> obs, int action, double epsilon) {
  MlpGrad analytic = policy_log_grad(net, obs, action);
  return grad_check_impl(net, analytic, epsilon,
                         [&](const Mlp& m) { return log_prob(m, obs, action); });
}

double grad_check_value(const Mlp& net, std::span<const double> obs, double epsilon) {
  std::vector<double> one{1.0};
  MlpGrad analytic = backprop(net, obs, one);
  return grad_check_impl(net, analytic, epsilon,
                         [&](const Mlp& m) { return forward_value(m, obs); });
}

namespace {
constexpr char kMagic[8] = {'A', 'B', 'M', 'L', 'P', '0', '0', '1'};
}

void save_mlp(const Mlp& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("save_mlp: cannot open '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  auto put_u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  put_u32(static_cast<uint32_t>(net.layers.size()));
  for (const auto& spec : net.layers) {
    put_u32(static_cast<uint32_t>(spec.in));
    put_u32(static_cast<uint32_t>(spec.out));
    put_u32(static_cast<uint32_t>(spec.act));
  }
  for (size_t l = 0; l < net.layers.size(); ++l) {
    out.write(reinterpret_cast<const char*>(net.w[l].data()),
              static_cast<std::streamsize>(net.w[l].size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(net.b[l].data()),
              static_cast<std::streamsize>(net.b[l].size() * sizeof(double)));
  }
  if (!out) throw ConfigError("save_mlp: write failed for '" + path + "'");
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_mlp: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw ConfigError("load_mlp: bad magic/version in '" + path + "'");
  auto get_u32 = [&]() {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  uint32_t nl = get_u32();
  if (nl == 0 || nl > 64) throw ConfigError("load_mlp: implausible layer count");
  Mlp net;
  for (uint32_t l = 0; l < nl; ++l) {
    LayerSpec spec;
    spec.in = static_cast<int>(get_u32());
    spec.out = static_cast<int>(get_u32());
    spec.act = static_cast<Activation>(get_u32());
    if (spec.in <= 0 || spec.out <= 0) throw ConfigError("load_mlp: bad layer widths");
    net.layers.push_back(spec);
    net.w.emplace_back(static_cast<size_t>(spec.in) * spec.out, 0.0);
    net.b.emplace_back(spec.out, 0.0);
  }
  for (uint32_t l = 0; l < nl; ++l) {
    in.read(reinterpret_cast<char*>(net.w[l].data()),
            static_cast<std::streamsize>(net.w[l].size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(net.b[l].data()),
            static_cast<std::streamsize>(net.b[l].size() * sizeof(double)));
  }
  if (!in) throw ConfigError("load_mlp: truncated file '" + path + "'");
  return net;
}

}  // namespace abmrl
