// Workload descriptor JSON (de)serialization and the pusher reference net.
#include "mxsim/workload.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mxsim {

WorkloadSpec workload_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("workload JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array())
    throw std::invalid_argument("workload JSON: missing layers array");
  WorkloadSpec w;
  w.name = j.value("name", std::string("workload"));
  w.batch = j.value("batch", 32);
  if (j.contains("format"))
    w.format = format_from_name(j["format"].get<std::string>());
  for (const auto& l : j["layers"]) {
    if (!l.is_array() || l.size() != 2 || !l[0].is_number_integer() ||
        !l[1].is_number_integer())
      throw std::invalid_argument("workload JSON: layer must be [in, out]");
    w.layers.push_back({l[0].get<int>(), l[1].get<int>()});
  }
  if (w.layers.empty())
    throw std::invalid_argument("workload JSON: no layers");
  if (w.batch < 1) throw std::invalid_argument("workload JSON: batch < 1");
  for (size_t i = 0; i < w.layers.size(); ++i) {
    if (w.layers[i][0] < 1 || w.layers[i][1] < 1)
      throw std::invalid_argument("workload JSON: layer dims must be >= 1");
    if (i + 1 < w.layers.size() && w.layers[i][1] != w.layers[i + 1][0])
      throw std::invalid_argument(
          "workload JSON: layer output dim must equal the next input dim");
  }
  return w;
}

std::string workload_to_json(const WorkloadSpec& w) {
  nlohmann::ordered_json j;
  j["name"] = w.name;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : w.layers) j["layers"].push_back({l[0], l[1]});
  j["batch"] = w.batch;
  j["format"] = format_info(w.format).name;
  return j.dump(2) + "\n";
}

WorkloadSpec load_workload(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open workload file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return workload_from_json(ss.str());
}

WorkloadSpec pusher_workload() {
  WorkloadSpec w;
  w.name = "pusher";
  w.layers = {{32, 256}, {256, 256}, {256, 256}, {256, 32}};
  w.batch = 32;
  w.format = ElementFormat::Int8;
  return w;
}

}  // namespace mxsim
