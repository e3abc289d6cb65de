#pragma once
// Fully-connected training workload descriptor. JSON wire form:
//   {"name": "pusher", "layers": [[32,256], ...], "batch": 32,
//    "format": "int8"}
// Layers chain: each layer's output dim is the next layer's input dim.

#include <array>
#include <string>
#include <vector>

#include "mxsim/formats.hpp"

namespace mxsim {

struct WorkloadSpec {
  std::string name = "workload";
  std::vector<std::array<int, 2>> layers;  // {input dim, output dim}
  int batch = 32;
  ElementFormat format = ElementFormat::Int8;
};

// Throws std::invalid_argument on malformed or inconsistent descriptors.
WorkloadSpec workload_from_json(const std::string& text);
std::string workload_to_json(const WorkloadSpec& w);
WorkloadSpec load_workload(const std::string& path);

// The robotics pusher policy network: 32-256-256-256-32, batch 32.
WorkloadSpec pusher_workload();

}  // namespace mxsim
