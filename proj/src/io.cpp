#include "coke/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace coke::io {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::filesystem::path& path, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataFormatError(path.string() + ":" + std::to_string(line) +
                          ": not a number: '" + s + "'");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataFormatError("cannot open for writing: " + path.string());
  return out;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataFormatError(path.string() + ": JSON parse error at byte " +
                          std::to_string(e.byte) + ": " + e.what());
  }
}

void require_version(const json& j, const std::filesystem::path& path, int expected) {
  if (!j.contains("version") || !j["version"].is_number_integer())
    throw DataFormatError(path.string() + ": missing integer 'version' field");
  const int v = j["version"].get<int>();
  if (v != expected)
    throw DataFormatError(path.string() + ": unsupported format version " +
                          std::to_string(v) + " (expected " +
                          std::to_string(expected) + ")");
}

int sensor_index(const std::string& name, const std::map<std::string, int>& by_name,
                 const std::filesystem::path& path) {
  auto it = by_name.find(name);
  if (it == by_name.end())
    throw DataFormatError(path.string() + ": unknown sensor name '" + name + "'");
  return it->second;
}

std::map<std::string, int> name_index(const std::vector<std::string>& names) {
  std::map<std::string, int> m;
  for (size_t i = 0; i < names.size(); ++i) m[names[i]] = static_cast<int>(i);
  return m;
}

}  // namespace

void write_data_csv(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_out(path);
  out << "recipe";
  for (const auto& s : data.sensor_names) out << ',' << s;
  out << '\n';
  for (int r = 0; r < data.rows(); ++r) {
    out << data.recipe_names[data.recipe_of[r]];
    for (int j = 0; j < data.cols(); ++j) {
      out << ',';
      if (data.present(r, j)) out << fmt_double(data.values(r, j));
    }
    out << '\n';
  }
}

void write_meta_json(const std::filesystem::path& path, const Dataset& data) {
  json machine = json::array();
  for (int m : data.machine_of) machine.push_back(m + 1);
  json j{{"version", 1},
         {"sensors", data.sensor_names},
         {"machine_of", machine},
         {"n", data.rows()},
         {"d", data.cols()},
         {"k", data.machines()}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto meta_path = dir / "meta.json";
  const json meta = load_json(meta_path);
  require_version(meta, meta_path, 1);
  for (const char* key : {"sensors", "machine_of", "n", "d", "k"})
    if (!meta.contains(key))
      throw DataFormatError(meta_path.string() + ": missing field '" + key + "'");

  Dataset data;
  data.sensor_names = meta["sensors"].get<std::vector<std::string>>();
  const int d = meta["d"].get<int>();
  const int n = meta["n"].get<int>();
  if (static_cast<int>(data.sensor_names.size()) != d)
    throw DataFormatError(meta_path.string() + ": sensors length does not match d");
  data.machine_of.clear();
  for (const auto& m : meta["machine_of"]) data.machine_of.push_back(m.get<int>() - 1);
  if (static_cast<int>(data.machine_of.size()) != d)
    throw DataFormatError(meta_path.string() + ": machine_of length does not match d");
  const int k = meta["k"].get<int>();

  const auto csv_path = dir / "data.csv";
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open: " + csv_path.string());
  std::string line;
  if (!std::getline(in, line))
    throw DataFormatError(csv_path.string() + ":1: empty file");
  {
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "recipe")
      throw DataFormatError(csv_path.string() + ":1: header must start with 'recipe'");
    if (static_cast<int>(header.size()) != d + 1)
      throw DataFormatError(csv_path.string() + ":1: expected " + std::to_string(d) +
                            " sensor columns, found " +
                            std::to_string(header.size() - 1));
    for (int j = 0; j < d; ++j)
      if (header[j + 1] != data.sensor_names[j])
        throw DataFormatError(csv_path.string() + ":1: header column " +
                              std::to_string(j + 2) + " is '" + header[j + 1] +
                              "' but meta.json names it '" + data.sensor_names[j] + "'");
  }

  data.values.setZero(n, d);
  data.present.setZero(n, d);
  data.recipe_of.resize(n);
  std::map<std::string, int> recipe_ids;
  int row = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (row >= n)
      throw DataFormatError(csv_path.string() + ":" + std::to_string(lineno) +
                            ": more rows than meta.json n=" + std::to_string(n));
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != d + 1)
      throw DataFormatError(csv_path.string() + ":" + std::to_string(lineno) +
                            ": expected " + std::to_string(d + 1) + " fields, found " +
                            std::to_string(fields.size()));
    auto [it, inserted] =
        recipe_ids.emplace(fields[0], static_cast<int>(recipe_ids.size()));
    if (inserted) data.recipe_names.push_back(fields[0]);
    data.recipe_of[row] = it->second;
    for (int j = 0; j < d; ++j) {
      if (fields[j + 1].empty()) continue;
      data.values(row, j) = parse_double(fields[j + 1], csv_path, lineno);
      data.present(row, j) = 1;
    }
    ++row;
  }
  if (row != n)
    throw DataFormatError(csv_path.string() + ": found " + std::to_string(row) +
                          " data rows, meta.json says n=" + std::to_string(n));
  if (data.machines() != k)
    throw DataFormatError(meta_path.string() + ": k=" + std::to_string(k) +
                          " does not match machine_of (max machine " +
                          std::to_string(data.machines()) + ")");
  data.validate();
  return data;
}

void write_edges_csv(const std::filesystem::path& path, const Adjacency& adj,
                     const std::vector<std::string>& sensor_names) {
  auto out = open_out(path);
  out << "from,to\n";
  for (const auto& [i, j] : adj.edges())
    out << sensor_names[i] << ',' << sensor_names[j] << '\n';
}

Adjacency read_edges_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& sensor_names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open: " + path.string());
  const auto by_name = name_index(sensor_names);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"from", "to"})
    throw DataFormatError(path.string() + ":1: expected header 'from,to'");
  Adjacency adj(static_cast<int>(sensor_names.size()));
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2)
      throw DataFormatError(path.string() + ":" + std::to_string(lineno) +
                            ": expected 2 fields");
    const int i = sensor_index(fields[0], by_name, path);
    const int j = sensor_index(fields[1], by_name, path);
    if (i == j)
      throw DataFormatError(path.string() + ":" + std::to_string(lineno) +
                            ": self-loop " + fields[0]);
    adj.set(i, j, true);
  }
  return adj;
}

void write_expert_json(const std::filesystem::path& path, const ExpertKnowledge& ek,
                       const std::vector<std::string>& sensor_names) {
  auto edge_list = [&](const std::vector<std::pair<int, int>>& edges) {
    json arr = json::array();
    for (const auto& [i, j] : edges)
      arr.push_back(json::array({sensor_names[i], sensor_names[j]}));
    return arr;
  };
  json j{{"version", 1},
         {"required", edge_list(ek.required)},
         {"forbidden", edge_list(ek.forbidden)}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

ExpertKnowledge read_expert_json(const std::filesystem::path& path,
                                 const std::vector<std::string>& sensor_names) {
  const json j = load_json(path);
  require_version(j, path, 1);
  const auto by_name = name_index(sensor_names);
  auto edge_list = [&](const char* key) {
    std::vector<std::pair<int, int>> edges;
    if (!j.contains(key)) return edges;
    for (const auto& e : j[key]) {
      if (!e.is_array() || e.size() != 2)
        throw DataFormatError(path.string() + ": '" + key +
                              "' entries must be [from, to] pairs");
      edges.emplace_back(sensor_index(e[0].get<std::string>(), by_name, path),
                         sensor_index(e[1].get<std::string>(), by_name, path));
    }
    return edges;
  };
  ExpertKnowledge ek;
  ek.required = edge_list("required");
  ek.forbidden = edge_list("forbidden");
  ek.validate(static_cast<int>(sensor_names.size()));
  return ek;
}

void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace) {
  auto out = open_out(path);
  out << "iter,reward,bic_term,penalty,edges,theta_full,theta_miss,f1\n";
  for (const auto& r : trace.rows) {
    out << r.iteration << ',' << fmt_double(r.reward) << ',' << fmt_double(r.bic_term)
        << ',' << fmt_double(r.penalty) << ',' << r.edges << ','
        << fmt_double(r.theta_full) << ',' << fmt_double(r.theta_miss) << ',';
    if (r.has_f1) out << fmt_double(r.f1);
    out << '\n';
  }
}

void write_params_json(const std::filesystem::path& path, const NetworkParams& params) {
  json tensors = json::object();
  auto put = [&](const std::string& name, const double* data, std::size_t count,
                 std::vector<int> shape) {
    json arr = json::array();
    for (std::size_t i = 0; i < count; ++i) arr.push_back(data[i]);
    tensors[name] = json{{"shape", shape}, {"data", std::move(arr)}};
  };
  auto& p = const_cast<NetworkParams&>(params);
  for_each_tensor(p, [&](const std::string& name, double* data, std::size_t count) {
    std::vector<int> shape;
    if (name == "w_in")
      shape = {p.hidden(), p.n_batch()};
    else if (count == static_cast<std::size_t>(p.hidden()) * p.hidden())
      shape = {p.hidden(), p.hidden()};
    else if (count == 1)
      shape = {1};
    else
      shape = {static_cast<int>(count)};
    put(name, data, count, shape);
  });
  json j{{"version", 1},
         {"hidden", params.hidden()},
         {"n_batch", params.n_batch()},
         {"tensors", std::move(tensors)}};
  auto out = open_out(path);
  out << j.dump() << '\n';
}

NetworkParams read_params_json(const std::filesystem::path& path) {
  const json j = load_json(path);
  require_version(j, path, 1);
  for (const char* key : {"hidden", "n_batch", "tensors"})
    if (!j.contains(key))
      throw DataFormatError(path.string() + ": missing field '" + key + "'");
  NetConfig cfg;
  cfg.hidden = j["hidden"].get<int>();
  cfg.n_batch = j["n_batch"].get<int>();
  NetworkParams p = NetworkParams::init(cfg);
  const json& tensors = j["tensors"];
  for_each_tensor(p, [&](const std::string& name, double* data, std::size_t count) {
    if (!tensors.contains(name))
      throw DataFormatError(path.string() + ": missing tensor '" + name + "'");
    const json& arr = tensors[name]["data"];
    if (arr.size() != count)
      throw DataFormatError(path.string() + ": tensor '" + name + "' has " +
                            std::to_string(arr.size()) + " values, expected " +
                            std::to_string(count));
    for (std::size_t i = 0; i < count; ++i) data[i] = arr[i].get<double>();
  });
  return p;
}

std::string metrics_to_json(const EdgeMetrics& m) {
  json j{{"tp", m.tp},        {"fp", m.fp},         {"fn", m.fn},
         {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  return j.dump(2);
}

void write_metrics_json(const std::filesystem::path& path, const EdgeMetrics& m) {
  auto out = open_out(path);
  out << metrics_to_json(m) << '\n';
}

}  // namespace coke::io
