#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "abmrl/rng.hpp"

namespace abmrl {

struct ContactEdge {
  int a = 0;
  int b = 0;
  double lambda = 1.0;  // contact intensity rate, > 0
};

// Undirected weighted contact graph. Edges are stored once (a < b); the
// per-season active flags live with the simulation, not here.
struct ContactNetwork {
  int n_nodes = 0;
  std::vector<ContactEdge> edges;
  std::vector<std::vector<int>> incident;  // node -> edge ids

  int num_edges() const { return static_cast<int>(edges.size()); }
  int degree(int node) const { return static_cast<int>(incident[node].size()); }
  double mean_degree() const;
  // <k^2>/<k> - 1: expected extra contacts of a node reached along an edge.
  double mean_excess_degree() const;

  static ContactNetwork from_edges(int n_nodes, std::vector<ContactEdge> edges);
};

// Degree-distribution driven generator specs.
struct NetworkSpec {
  std::string type = "config_poisson";  // ring | config_poisson | config_powerlaw | degrees | file
  int n_nodes = 0;
  double mean_degree = 8.0;             // config_poisson
  double exponent = 2.5;                // config_powerlaw
  int k_min = 2;
  int k_max = 0;                        // 0 => sqrt(n)
  std::vector<int> degrees;             // explicit sequence
  std::string path;                     // file
  double lambda = 1.0;                  // homogeneous edge intensity

  static NetworkSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Configuration-model style generation: sample/accept a degree sequence, pair
// stubs uniformly, drop self-loops and duplicate pairs. Explicit sequences
// must be graphical.
ContactNetwork generate_network(const NetworkSpec& spec, RngStream& rng);

// CSV edge list with header "i,j,lambda". Parse errors carry the line number.
// n_nodes = 0 infers the count from the largest endpoint; pass it explicitly
// to keep trailing isolated nodes, which an edge list cannot express.
ContactNetwork load_network(const std::string& path, int n_nodes = 0);
void save_network(const ContactNetwork& net, const std::string& path);

bool is_graphical(std::vector<int> degrees);  // Erdos-Gallai

}  // namespace abmrl
