#pragma once

// Instance files: JSON for costs, caps and edges, with the MRF stored in a
// sibling UAI file referenced by the "model" key. Networks may also be read
// from a whitespace edge list ("u v c_e g0_e" per line, '#' comments).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include "json.hpp"
#include "problems.hpp"

namespace xorpgd {

using json = nlohmann::json;

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline factor_graph load_uai_file(const std::filesystem::path &p) {
  std::ifstream in(p);
  if (!in) throw io_error("cannot open model file " + p.string());
  try {
    return load_uai(in);
  } catch (const parse_error &e) {
    throw io_error(p.string() + ":" + std::to_string(e.line()) + ": " + e.what());
  }
}

inline void save_uai_file(const std::filesystem::path &p, const factor_graph &fg) {
  std::ofstream out(p);
  if (!out) throw io_error("cannot write " + p.string());
  write_uai(out, fg);
}

inline json to_json(const inventory_instance &inst, const std::string &model_file) {
  return {{"type", "inventory"},     {"n", inst.n},
          {"order_cost", inst.order_cost}, {"backorder_cost", inst.backorder_cost},
          {"holding_cost", inst.holding_cost}, {"storage", inst.storage},
          {"storage_cap", inst.storage_cap}, {"demand_low", inst.demand_low},
          {"demand_high", inst.demand_high}, {"model", model_file}};
}

inline json to_json(const network_instance &inst, const std::string &model_file) {
  json edges = json::array();
  for (const auto &e : inst.edges) edges.push_back({e.u, e.v});
  return {{"type", "network"},
          {"nodes", inst.nodes},
          {"edges", edges},
          {"base_conductance", inst.base_conductance},
          {"upgrade_cost", inst.upgrade_cost},
          {"budget", inst.budget},
          {"disconnection_penalty", inst.disconnection_penalty},
          {"model", model_file}};
}

using instance = std::variant<inventory_instance, network_instance>;

/// Writes <stem>.json and <stem>.uai into dir.
inline std::filesystem::path save_instance(const std::filesystem::path &dir, const std::string &stem,
                                           const instance &inst) {
  std::filesystem::create_directories(dir);
  const std::string model = stem + ".uai";
  json j;
  std::visit(
      [&](const auto &x) {
        save_uai_file(dir / model, x.model);
        j = to_json(x, model);
      },
      inst);
  const auto path = dir / (stem + ".json");
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  return path;
}

inline instance load_instance(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open instance file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw io_error(path.string() + ": " + e.what());
  }
  try {
    const auto model_path = path.parent_path() / j.at("model").get<std::string>();
    const std::string type = j.at("type").get<std::string>();
    if (type == "inventory") {
      inventory_instance inst;
      inst.n = j.at("n").get<std::size_t>();
      inst.order_cost = j.at("order_cost").get<vec>();
      inst.backorder_cost = j.at("backorder_cost").get<vec>();
      inst.holding_cost = j.at("holding_cost").get<vec>();
      inst.storage = j.at("storage").get<vec>();
      inst.storage_cap = j.at("storage_cap").get<double>();
      inst.demand_low = j.at("demand_low").get<vec>();
      inst.demand_high = j.at("demand_high").get<vec>();
      inst.model = load_uai_file(model_path);
      inst.validate();
      return inst;
    }
    if (type == "network") {
      network_instance inst;
      inst.nodes = j.at("nodes").get<std::size_t>();
      for (const auto &e : j.at("edges")) inst.edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
      inst.base_conductance = j.at("base_conductance").get<vec>();
      inst.upgrade_cost = j.at("upgrade_cost").get<vec>();
      inst.budget = j.value("budget", 1000.0);
      inst.disconnection_penalty = j.value("disconnection_penalty", 1e6);
      inst.model = load_uai_file(model_path);
      inst.validate();
      return inst;
    }
    throw io_error(path.string() + ": unknown instance type '" + type + "'");
  } catch (const json::exception &e) {
    throw io_error(path.string() + ": " + e.what());
  }
}

struct edge_list {
  std::size_t nodes = 0;
  std::vector<edge> edges;
  vec upgrade_cost, base_conductance;
};

inline edge_list parse_edge_list(std::istream &in) {
  edge_list out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long long u, v;
    double c, g0;
    if (!(ls >> u)) continue;  // blank
    if (!(ls >> v >> c >> g0))
      throw parse_error(lineno, "expected 'u v c_e g0_e'");
    std::string extra;
    if (ls >> extra) throw parse_error(lineno, "trailing token '" + extra + "'");
    if (u < 0 || v < 0) throw parse_error(lineno, "negative node id");
    out.edges.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v)});
    out.upgrade_cost.push_back(c);
    out.base_conductance.push_back(g0);
    out.nodes = std::max<std::size_t>(out.nodes, static_cast<std::size_t>(std::max(u, v)) + 1);
  }
  return out;
}

/// Network from an edge list; without a failure model one is generated from the seed.
inline network_instance network_from_edge_list(const edge_list &el, std::optional<factor_graph> model,
                                               std::uint64_t seed) {
  network_instance inst;
  inst.nodes = el.nodes;
  inst.edges = el.edges;
  inst.upgrade_cost = el.upgrade_cost;
  inst.base_conductance = el.base_conductance;
  if (model) {
    inst.model = std::move(*model);
  } else {
    rng_type rng(seed);
    inst.model = gen_failure_model(inst.edges, rng);
  }
  inst.validate();
  return inst;
}

}  // namespace xorpgd
