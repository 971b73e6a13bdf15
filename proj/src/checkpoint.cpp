#include "cmap/checkpoint.hpp"

#include "cmap/error.hpp"

namespace cmap::ad {

using nlohmann::json;

json params_to_json(const ParamSet& params) {
  json out = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    json values = json::array();
    for (Eigen::Index k = 0; k < p.value.size(); ++k) values.push_back(p.value.data()[k]);
    out.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"values", values}});
  }
  return out;
}

namespace {

Matrix matrix_from_entry(const json& entry) {
  try {
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    const json& values = entry.at("values");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(values.size()) != rows * cols)
      throw ValidationError("parameter " + entry.value("name", std::string("?")) +
                            ": value count does not match shape");
    Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = values[static_cast<std::size_t>(k)].get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed parameter entry: ") + e.what());
  }
}

}  // namespace

ParamSet params_from_json(const json& manifest) {
  if (!manifest.is_array()) throw ParseError("parameter manifest must be an array");
  ParamSet out;
  for (const json& entry : manifest) {
    out.add(entry.at("name").get<std::string>(), matrix_from_entry(entry));
  }
  return out;
}

void load_params_into(const json& manifest, ParamSet& params) {
  ParamSet loaded = params_from_json(manifest);
  if (loaded.size() != params.size())
    throw ValidationError("checkpoint has " + std::to_string(loaded.size()) +
                          " parameters, model expects " + std::to_string(params.size()));
  try {
    params.assign_values(loaded);
  } catch (const ContractError& e) {
    throw ValidationError(std::string("checkpoint does not match model: ") + e.what());
  }
}

}  // namespace cmap::ad
