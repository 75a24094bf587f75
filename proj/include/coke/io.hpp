#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coke/core.hpp"
#include "coke/initgraph.hpp"
#include "coke/metrics.hpp"
#include "coke/neuralnet.hpp"
#include "coke/trainer.hpp"

namespace coke::io {

// data.csv: header `recipe,<sensor names>`; a missing cell is an empty field.
void write_data_csv(const std::filesystem::path& path, const Dataset& data);

// meta.json: {version, sensors, machine_of (1-based), n, d, k}.
void write_meta_json(const std::filesystem::path& path, const Dataset& data);

/// Reads meta.json + data.csv from dir into a validated Dataset.
Dataset read_dataset(const std::filesystem::path& dir);

// Edge lists: CSV `from,to` using sensor names.
void write_edges_csv(const std::filesystem::path& path, const Adjacency& adj,
                     const std::vector<std::string>& sensor_names);
Adjacency read_edges_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& sensor_names);

// expert.json: {version, required: [[from,to]...], forbidden: [[from,to]...]}.
void write_expert_json(const std::filesystem::path& path, const ExpertKnowledge& ek,
                       const std::vector<std::string>& sensor_names);
ExpertKnowledge read_expert_json(const std::filesystem::path& path,
                                 const std::vector<std::string>& sensor_names);

// trace.csv: iter,reward,bic_term,penalty,edges,theta_full,theta_miss,f1.
void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace);

// Versioned JSON tensor dump of all trainable weights.
void write_params_json(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams read_params_json(const std::filesystem::path& path);

void write_metrics_json(const std::filesystem::path& path, const EdgeMetrics& m);
std::string metrics_to_json(const EdgeMetrics& m);

}  // namespace coke::io
