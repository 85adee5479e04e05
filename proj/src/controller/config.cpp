#include "spider/controller/config.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spider::controller {

using nlohmann::json;

namespace {

void require_positive(std::size_t v, const char* field) {
  if (v < 1) throw std::invalid_argument(std::string("config field '") + field + "' must be >= 1");
}

json per_modality_json(const PerModality& v) {
  json j = json::object();
  for (Modality m : templ::kAllModalities) j[std::string(templ::modality_name(m))] = v[templ::modality_index(m)];
  return j;
}

PerModality per_modality_from_json(const json& j, const char* field) {
  PerModality out{};
  if (j.is_number_unsigned() || j.is_number_integer()) {
    out.fill(j.get<std::size_t>());
    return out;
  }
  if (!j.is_object()) throw std::invalid_argument(std::string("config field '") + field + "' must be an integer or object");
  out.fill(1);
  for (const auto& [key, value] : j.items()) {
    const auto m = templ::parse_modality(key);
    if (!m) throw std::invalid_argument(std::string("config field '") + field + "' has unknown modality '" + key + "'");
    out[templ::modality_index(*m)] = value.get<std::size_t>();
  }
  return out;
}

}  // namespace

void ControllerConfig::validate() const {
  require_positive(D, "D");
  require_positive(D_c, "D_c");
  require_positive(K, "K");
  require_positive(expert_layers, "expert_layers");
  require_positive(router_hidden, "router_hidden");
  if (D < 2) throw std::invalid_argument("config field 'D' must be >= 2 for layer normalization");
  for (Modality m : templ::kAllModalities) {
    require_positive(n_of(m), "N");
    require_positive(l_of(m), "L");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("config field 'alpha' must be finite and >= 0");
  if (!(lambda_recon >= 0.0) || !std::isfinite(lambda_recon)) {
    throw std::invalid_argument("config field 'lambda_recon' must be finite and >= 0");
  }
}

json to_json(const ControllerConfig& c) {
  return {{"D", c.D},
          {"D_c", c.D_c},
          {"K", c.K},
          {"N", per_modality_json(c.N)},
          {"L", per_modality_json(c.L)},
          {"alpha", c.alpha},
          {"expert_layers", c.expert_layers},
          {"router_hidden", c.router_hidden},
          {"lambda_recon", c.lambda_recon}};
}

ControllerConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("controller config must be a JSON object");
  ControllerConfig c;
  if (j.contains("D")) c.D = j.at("D").get<std::size_t>();
  if (j.contains("D_c")) c.D_c = j.at("D_c").get<std::size_t>();
  if (j.contains("K")) c.K = j.at("K").get<std::size_t>();
  if (j.contains("N")) c.N = per_modality_from_json(j.at("N"), "N");
  if (j.contains("L")) c.L = per_modality_from_json(j.at("L"), "L");
  if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
  if (j.contains("expert_layers")) c.expert_layers = j.at("expert_layers").get<std::size_t>();
  if (j.contains("router_hidden")) c.router_hidden = j.at("router_hidden").get<std::size_t>();
  if (j.contains("lambda_recon")) c.lambda_recon = j.at("lambda_recon").get<double>();
  c.validate();
  return c;
}

}  // namespace spider::controller
