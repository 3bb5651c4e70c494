#include "ecad/network.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ecad {

std::string SystolicConfig::to_string() const {
  std::ostringstream out;
  out << rows << ',' << cols << ',' << vec << ',' << interleave << ',' << scale;
  return out.str();
}

SystolicConfig SystolicConfig::parse(std::string_view text) {
  std::int64_t values[5];
  std::size_t field = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (field < 5) {
    while (p < end && *p == ' ') ++p;
    auto [next, ec] = std::from_chars(p, end, values[field]);
    if (ec != std::errc{}) break;
    ++field;
    p = next;
    while (p < end && *p == ' ') ++p;
    if (field < 5) {
      if (p == end || *p != ',') break;
      ++p;
    }
  }
  if (field != 5 || p != end) {
    throw std::invalid_argument("systolic config must be 'rows,cols,vec,interleave,scale', got '" +
                                std::string(text) + "'");
  }
  SystolicConfig cfg{values[0], values[1], values[2], values[3], values[4]};
  cfg.validate();
  return cfg;
}

void SystolicConfig::validate() const {
  if (rows < 1 || cols < 1 || vec < 1 || interleave < 1 || scale < 1) {
    throw std::invalid_argument("systolic config values must all be >= 1: " + to_string());
  }
}

std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "none"; }

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "none") return Activation::kNone;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

void NetworkDescription::validate() const {
  if (layers.empty()) throw std::invalid_argument("network description has no layers");
  if (batch < 1) throw std::invalid_argument("network description batch must be >= 1");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in < 1 || layers[i].out < 1) {
      throw std::invalid_argument("layer '" + layers[i].name + "' has a zero dimension");
    }
    if (i > 0 && layers[i].in != layers[i - 1].out) {
      throw std::invalid_argument("layer '" + layers[i].name + "' input does not match '" +
                                  layers[i - 1].name + "' output");
    }
  }
  if (systolic) systolic->validate();
}

std::int64_t NetworkDescription::macs_per_sample() const {
  std::int64_t total = 0;
  for (const auto& l : layers) total += l.in * l.out;
  return total;
}

Json to_json(const SystolicConfig& cfg) {
  Json j = Json::object();
  j["rows"] = cfg.rows;
  j["cols"] = cfg.cols;
  j["vec"] = cfg.vec;
  j["interleave"] = cfg.interleave;
  j["scale"] = cfg.scale;
  return j;
}

SystolicConfig systolic_from_json(const Json& j) {
  SystolicConfig cfg{j.at("rows").get<std::int64_t>(), j.at("cols").get<std::int64_t>(),
                     j.at("vec").get<std::int64_t>(), j.at("interleave").get<std::int64_t>(),
                     j.at("scale").get<std::int64_t>()};
  cfg.validate();
  return cfg;
}

Json to_json(const NetworkDescription& desc) {
  Json j = Json::object();
  j["id"] = desc.id;
  j["batch"] = desc.batch;
  Json layers = Json::array();
  for (const auto& l : desc.layers) {
    Json lj = Json::object();
    lj["name"] = l.name;
    lj["in"] = l.in;
    lj["out"] = l.out;
    lj["activation"] = std::string(to_string(l.activation));
    lj["bias"] = l.bias;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  if (desc.systolic) j["systolic"] = to_json(*desc.systolic);
  return j;
}

NetworkDescription description_from_json(const Json& j) {
  NetworkDescription desc;
  try {
    const auto& id = j.at("id");
    desc.id = id.is_string() ? id.get<std::string>() : id.dump();
    desc.batch = j.at("batch").get<std::int64_t>();
    for (const auto& lj : j.at("layers")) {
      LayerDesc l;
      l.name = lj.at("name").get<std::string>();
      l.in = lj.at("in").get<std::int64_t>();
      l.out = lj.at("out").get<std::int64_t>();
      l.activation = activation_from_string(lj.value("activation", std::string("none")));
      l.bias = lj.value("bias", true);
      desc.layers.push_back(std::move(l));
    }
    if (auto it = j.find("systolic"); it != j.end() && !it->is_null()) {
      desc.systolic = systolic_from_json(*it);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed network description: ") + e.what());
  }
  desc.validate();
  return desc;
}

NetworkDescription load_description(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network description " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return description_from_json(j);
}

void save_description(const NetworkDescription& desc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write network description " + path.string());
  out << to_json(desc).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace ecad
