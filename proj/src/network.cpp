#include "abmrl/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "abmrl/errors.hpp"

namespace abmrl {

double ContactNetwork::mean_degree() const {
  if (n_nodes == 0) return 0.0;
  return 2.0 * num_edges() / n_nodes;
}

double ContactNetwork::mean_excess_degree() const {
  if (n_nodes == 0) return 0.0;
  double k1 = 0.0, k2 = 0.0;
  for (int v = 0; v < n_nodes; ++v) {
    double d = degree(v);
    k1 += d;
    k2 += d * d;
  }
  if (k1 == 0.0) return 0.0;
  return k2 / k1 - 1.0;
}

ContactNetwork ContactNetwork::from_edges(int n_nodes, std::vector<ContactEdge> edges) {
  require(n_nodes >= 2, "ContactNetwork: need at least two nodes");
  ContactNetwork net;
  net.n_nodes = n_nodes;
  net.incident.resize(static_cast<size_t>(n_nodes));
  std::set<std::pair<int, int>> seen;
  for (auto e : edges) {
    require(e.a >= 0 && e.a < n_nodes && e.b >= 0 && e.b < n_nodes,
            "ContactNetwork: edge endpoint out of range");
    require(e.a != e.b, "ContactNetwork: self-loops not allowed");
    require(e.lambda > 0.0, "ContactNetwork: lambda must be positive");
    if (e.a > e.b) std::swap(e.a, e.b);
    require(seen.emplace(e.a, e.b).second, "ContactNetwork: duplicate edge");
    int id = static_cast<int>(net.edges.size());
    net.edges.push_back(e);
    net.incident[static_cast<size_t>(e.a)].push_back(id);
    net.incident[static_cast<size_t>(e.b)].push_back(id);
  }
  return net;
}

bool is_graphical(std::vector<int> degrees) {
  long long sum = std::accumulate(degrees.begin(), degrees.end(), 0LL);
  if (sum % 2 != 0) return false;
  std::sort(degrees.begin(), degrees.end(), std::greater<>());
  int n = static_cast<int>(degrees.size());
  if (n == 0) return true;
  if (degrees.back() < 0 || degrees.front() >= n) return false;
  long long prefix = 0;
  for (int k = 1; k <= n; ++k) {
    prefix += degrees[k - 1];
    long long rest = 0;
    for (int i = k; i < n; ++i) rest += std::min(degrees[i], k);
    if (prefix > static_cast<long long>(k) * (k - 1) + rest) return false;
  }
  return true;
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  spec.type = j.value("type", spec.type);
  spec.n_nodes = j.value("n_nodes", spec.n_nodes);
  spec.mean_degree = j.value("mean_degree", spec.mean_degree);
  spec.exponent = j.value("exponent", spec.exponent);
  spec.k_min = j.value("k_min", spec.k_min);
  spec.k_max = j.value("k_max", spec.k_max);
  spec.lambda = j.value("lambda", spec.lambda);
  if (j.contains("degrees")) spec.degrees = j.at("degrees").get<std::vector<int>>();
  spec.path = j.value("path", spec.path);
  return spec;
}

nlohmann::json NetworkSpec::to_json() const {
  nlohmann::json j{{"type", type}, {"lambda", lambda}};
  if (type == "file") {
    j["path"] = path;
    return j;
  }
  j["n_nodes"] = n_nodes;
  if (type == "config_poisson") j["mean_degree"] = mean_degree;
  if (type == "config_powerlaw") {
    j["exponent"] = exponent;
    j["k_min"] = k_min;
    j["k_max"] = k_max;
  }
  if (type == "degrees") j["degrees"] = degrees;
  return j;
}

namespace {

int sample_poisson(double mean, RngStream& rng) {
  // Knuth's product method; means here are small (contact degrees).
  double limit = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

int sample_powerlaw(double exponent, int k_min, int k_max, RngStream& rng) {
  // Discrete inverse-CDF over [k_min, k_max].
  double u = rng.uniform();
  double z = 0.0;
  for (int k = k_min; k <= k_max; ++k) z += std::pow(k, -exponent);
  double acc = 0.0;
  for (int k = k_min; k <= k_max; ++k) {
    acc += std::pow(k, -exponent) / z;
    if (u < acc) return k;
  }
  return k_max;
}

ContactNetwork pair_stubs(int n, const std::vector<int>& degrees, double lambda,
                          RngStream& rng) {
  std::vector<int> stubs;
  for (int v = 0; v < n; ++v)
    for (int d = 0; d < degrees[static_cast<size_t>(v)]; ++d) stubs.push_back(v);
  // Fisher-Yates with the stream, then pair consecutive stubs; self-loops
  // and duplicate pairs are dropped (erased configuration model).
  for (size_t i = stubs.size(); i > 1; --i) {
    size_t j = rng.below(i);
    std::swap(stubs[i - 1], stubs[j]);
  }
  std::set<std::pair<int, int>> seen;
  std::vector<ContactEdge> edges;
  for (size_t i = 0; i + 1 < stubs.size(); i += 2) {
    int a = stubs[i], b = stubs[i + 1];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.emplace(a, b).second) continue;
    edges.push_back({a, b, lambda});
  }
  return ContactNetwork::from_edges(n, std::move(edges));
}

}  // namespace

ContactNetwork generate_network(const NetworkSpec& spec, RngStream& rng) {
  if (spec.type == "file") return load_network(spec.path);
  require(spec.n_nodes >= 2, "generate_network: n_nodes must be >= 2");
  require(spec.lambda > 0.0, "generate_network: lambda must be positive");
  int n = spec.n_nodes;

  if (spec.type == "ring") {
    std::vector<ContactEdge> edges;
    for (int v = 0; v < n; ++v) edges.push_back({v, (v + 1) % n, spec.lambda});
    return ContactNetwork::from_edges(n, std::move(edges));
  }

  std::vector<int> degrees(static_cast<size_t>(n), 0);
  if (spec.type == "config_poisson") {
    require(spec.mean_degree > 0.0, "generate_network: mean_degree must be positive");
    for (auto& d : degrees) d = sample_poisson(spec.mean_degree, rng);
  } else if (spec.type == "config_powerlaw") {
    int k_max = spec.k_max > 0 ? spec.k_max
                               : std::max(spec.k_min, static_cast<int>(std::sqrt(n)));
    require(spec.k_min >= 1 && k_max >= spec.k_min, "generate_network: bad powerlaw bounds");
    for (auto& d : degrees) d = sample_powerlaw(spec.exponent, spec.k_min, k_max, rng);
  } else if (spec.type == "degrees") {
    require(static_cast<int>(spec.degrees.size()) == n,
            "generate_network: degree sequence length must equal n_nodes");
    require(is_graphical(spec.degrees), "generate_network: degree sequence is not graphical");
    degrees = spec.degrees;
  } else {
    throw ConfigError("generate_network: unknown spec type '" + spec.type + "'");
  }

  long long total = std::accumulate(degrees.begin(), degrees.end(), 0LL);
  if (total % 2 != 0) {
    // Sampled sequences may come out odd; bump one stub to make them pairable.
    degrees[static_cast<size_t>(rng.below(static_cast<uint64_t>(n)))] += 1;
  }
  return pair_stubs(n, degrees, spec.lambda, rng);
}

ContactNetwork load_network(const std::string& path, int n_nodes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_network: cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw ConfigError("load_network: " + path + ":" + std::to_string(line_no) + ": " + why);
  };
  if (!std::getline(in, line)) fail("empty file");
  ++line_no;
  // tolerate trailing CR from foreign line endings
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "i,j,lambda") fail("expected header 'i,j,lambda'");

  std::vector<ContactEdge> edges;
  int max_node = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string fi, fj, fl;
    if (!std::getline(row, fi, ',') || !std::getline(row, fj, ',') || !std::getline(row, fl))
      fail("expected three comma-separated fields");
    ContactEdge e;
    try {
      size_t used = 0;
      e.a = std::stoi(fi, &used);
      if (used != fi.size()) fail("bad node id '" + fi + "'");
      e.b = std::stoi(fj, &used);
      if (used != fj.size()) fail("bad node id '" + fj + "'");
      e.lambda = std::stod(fl, &used);
      if (used != fl.size()) fail("bad lambda '" + fl + "'");
    } catch (const std::logic_error&) {
      fail("unparsable numeric field");
    }
    if (e.a < 0 || e.b < 0) fail("negative node id");
    if (e.a == e.b) fail("self-loop");
    if (!(e.lambda > 0.0)) fail("lambda must be positive");
    max_node = std::max({max_node, e.a, e.b});
    edges.push_back(e);
  }
  if (edges.empty()) fail("no edges");
  int n = n_nodes > 0 ? n_nodes : max_node + 1;
  if (n <= max_node) fail("edge endpoint exceeds declared node count");
  return ContactNetwork::from_edges(n, std::move(edges));
}

void save_network(const ContactNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_network: cannot open '" + path + "'");
  out << "i,j,lambda\n";
  out.precision(17);
  for (const auto& e : net.edges) out << e.a << "," << e.b << "," << e.lambda << "\n";
}

}  // namespace abmrl
