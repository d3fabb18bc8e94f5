#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abmrl/rng.hpp"

namespace abmrl {

enum class Activation { kTanh, kIdentity };

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::kTanh;
};

// Softmax policy output. probabilities() sums to 1 within 1e-12.
struct ActionDistribution {
  std::vector<double> p;
  int size() const { return static_cast<int>(p.size()); }
};

// Dense feedforward net, weights row-major per layer (w[l][o*in + i]).
// The final layer is always linear; a policy head applies softmax on top,
// a value head reads the single output directly.
struct Mlp {
  std::vector<LayerSpec> layers;
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  // widths = {input, hidden..., output}; hidden layers use `hidden_act`.
  static Mlp make(const std::vector<int>& widths, Activation hidden_act = Activation::kTanh);

  int input_dim() const { return layers.front().in; }
  int output_dim() const { return layers.back().out; }
  int param_count() const;

  // Uniform in +-1/sqrt(fan_in) for weights, zero biases.
  void init_uniform(RngStream& rng);

  std::vector<double> forward(std::span<const double> x) const;
};

// Gradient (or accumulator) with the same shape as an Mlp's parameters.
struct MlpGrad {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  static MlpGrad zeros_like(const Mlp& net);
  void add(const MlpGrad& other, double scale = 1.0);
  double max_abs() const;
};

// params += alpha * grad
void axpy(Mlp& net, double alpha, const MlpGrad& grad);

// Reverse-mode gradient of sum_k gout[k] * output[k] w.r.t. all parameters.
MlpGrad backprop(const Mlp& net, std::span<const double> x, std::span<const double> gout);

// Max-subtracted softmax; safe for logits up to +-500 and beyond.
std::vector<double> softmax(std::span<const double> logits);

ActionDistribution forward_policy(const Mlp& net, std::span<const double> obs);
double forward_value(const Mlp& net, std::span<const double> obs);

// Draws an action; returns (action id, log of the drawn entry).
std::pair<int, double> sample_action(const ActionDistribution& dist, RngStream& rng);

// Numerically stable log pi(action | obs).
double log_prob(const Mlp& net, std::span<const double> obs, int action);

// Gradient of log pi(action | obs) w.r.t. parameters.
MlpGrad policy_log_grad(const Mlp& net, std::span<const double> obs, int action);

// Central-difference check of the analytic gradient on a scalar loss.
// Returns the max relative error over all parameters.
double grad_check_policy(const Mlp& net, std::span<const double> obs, int action, double epsilon);
double grad_check_value(const Mlp& net, std::span<const double> obs, double epsilon);

// Versioned binary parameter files.
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace abmrl
