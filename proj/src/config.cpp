#include "lau/config.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace lau {

namespace {

template <typename T>
T get_as(const nlohmann::json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!value.is_string()) throw ConfigError(key + ": expected a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!value.is_number_integer()) throw ConfigError(key + ": expected an integer");
    } else {
      if (!value.is_number()) throw ConfigError(key + ": expected a number");
    }
    return value.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

using Setter = std::function<void(TrainConfig&, const nlohmann::json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](TrainConfig& c, const nlohmann::json& v) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
           throw ConfigError("seed: expected a non-negative integer");
         }
         c.seed = v.get<std::uint64_t>();
       }},
      {"classes", [](TrainConfig& c, const nlohmann::json& v) { c.classes = get_as<int>(v, "classes"); }},
      {"image_size", [](TrainConfig& c, const nlohmann::json& v) { c.image_size = get_as<int>(v, "image_size"); }},
      {"output_stride", [](TrainConfig& c, const nlohmann::json& v) { c.output_stride = get_as<int>(v, "output_stride"); }},
      {"lau_ratio", [](TrainConfig& c, const nlohmann::json& v) { c.lau_ratio = get_as<int>(v, "lau_ratio"); }},
      {"lambda", [](TrainConfig& c, const nlohmann::json& v) { c.lambda = get_as<double>(v, "lambda"); }},
      {"gamma", [](TrainConfig& c, const nlohmann::json& v) { c.gamma = get_as<double>(v, "gamma"); }},
      {"loss", [](TrainConfig& c, const nlohmann::json& v) {
         c.loss = parse_loss_kind(get_as<std::string>(v, "loss"));
       }},
      {"upsampler", [](TrainConfig& c, const nlohmann::json& v) {
         c.upsampler = parse_upsampler_kind(get_as<std::string>(v, "upsampler"));
       }},
      {"lr", [](TrainConfig& c, const nlohmann::json& v) { c.lr = get_as<double>(v, "lr"); }},
      {"power", [](TrainConfig& c, const nlohmann::json& v) { c.power = get_as<double>(v, "power"); }},
      {"momentum", [](TrainConfig& c, const nlohmann::json& v) { c.momentum = get_as<double>(v, "momentum"); }},
      {"weight_decay", [](TrainConfig& c, const nlohmann::json& v) { c.weight_decay = get_as<double>(v, "weight_decay"); }},
      {"epochs", [](TrainConfig& c, const nlohmann::json& v) { c.epochs = get_as<int>(v, "epochs"); }},
      {"batch", [](TrainConfig& c, const nlohmann::json& v) { c.batch = get_as<int>(v, "batch"); }},
      {"m_channels", [](TrainConfig& c, const nlohmann::json& v) { c.m_channels = get_as<int>(v, "m_channels"); }},
      {"c_prime", [](TrainConfig& c, const nlohmann::json& v) { c.c_prime = get_as<int>(v, "c_prime"); }},
      {"decoder_channels", [](TrainConfig& c, const nlohmann::json& v) { c.decoder_channels = get_as<int>(v, "decoder_channels"); }},
      {"leaky_slope", [](TrainConfig& c, const nlohmann::json& v) { c.leaky_slope = get_as<double>(v, "leaky_slope"); }},
      {"noise_std", [](TrainConfig& c, const nlohmann::json& v) { c.noise_std = get_as<double>(v, "noise_std"); }},
      {"train_count", [](TrainConfig& c, const nlohmann::json& v) { c.train_count = get_as<int>(v, "train_count"); }},
      {"val_count", [](TrainConfig& c, const nlohmann::json& v) { c.val_count = get_as<int>(v, "val_count"); }},
  };
  return table;
}

}  // namespace

TrainConfig parse_config(const nlohmann::json& j) { return parse_config(j, TrainConfig{}); }

TrainConfig parse_config(const nlohmann::json& j, TrainConfig base) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key + ": unknown config key");
    it->second(base, value);
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"seed", c.seed},
      {"classes", c.classes},
      {"image_size", c.image_size},
      {"output_stride", c.output_stride},
      {"lau_ratio", c.lau_ratio},
      {"lambda", c.lambda},
      {"gamma", c.gamma},
      {"loss", to_string(c.loss)},
      {"upsampler", to_string(c.upsampler)},
      {"lr", c.lr},
      {"power", c.power},
      {"momentum", c.momentum},
      {"weight_decay", c.weight_decay},
      {"epochs", c.epochs},
      {"batch", c.batch},
      {"m_channels", c.m_channels},
      {"c_prime", c.c_prime},
      {"decoder_channels", c.decoder_channels},
      {"leaky_slope", c.leaky_slope},
      {"noise_std", c.noise_std},
      {"train_count", c.train_count},
      {"val_count", c.val_count},
  };
}

}  // namespace lau
