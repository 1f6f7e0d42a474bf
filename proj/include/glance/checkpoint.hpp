#pragma once

// Float checkpoints (JSON) for training resumption and CLI plumbing. Doubles
// are written with round-trip precision, so save/load is lossless.

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "glance/dwn.hpp"
#include "glance/errors.hpp"
#include "glance/training.hpp"

namespace glance::dwn {

using nlohmann::json;

inline json config_to_json(const DwnConfig& c) {
  return json{{"input_size", c.input_size},
              {"pool_k", c.pool_k},
              {"therm_bits", c.therm_bits},
              {"temperature", c.temperature},
              {"temperature_final", c.temperature_final},
              {"num_luts", c.num_luts},
              {"addr_bits", c.addr_bits},
              {"loss_lambda", c.loss_lambda},
              {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"grad_clip", c.grad_clip},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"binarize_epochs", c.binarize_epochs},
              {"seed", c.seed}};
}

// Missing keys keep their defaults; present keys must have the right type.
inline DwnConfig config_from_json(const json& j, const std::string& path = "model") {
  DwnConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw ConfigError(path + "." + key + ": wrong type");
    }
  };
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  get("input_size", c.input_size);
  get("pool_k", c.pool_k);
  get("therm_bits", c.therm_bits);
  get("temperature", c.temperature);
  get("temperature_final", c.temperature_final);
  get("num_luts", c.num_luts);
  get("addr_bits", c.addr_bits);
  get("loss_lambda", c.loss_lambda);
  get("learning_rate", c.learning_rate);
  get("weight_decay", c.weight_decay);
  get("grad_clip", c.grad_clip);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("binarize_epochs", c.binarize_epochs);
  get("seed", c.seed);
  return c;
}

struct Checkpoint {
  GazeModel model;
  AdamState optimizer;
  int next_epoch = 0;
  double best_metric = -1;  // negative when not yet evaluated
};

inline json checkpoint_to_json(const Checkpoint& ck) {
  const auto& m = ck.model;
  json j;
  j["format"] = "glance-checkpoint";
  j["version"] = 1;
  j["config"] = config_to_json(m.config);
  j["thresholds"] = {{"fitted", m.thresholds.fitted}, {"tau", m.thresholds.tau}, {"quantile_rule", "linear"}};
  j["connection_map"] = {{"seed", m.map.seed}, {"index", m.map.index}};
  j["luts"] = m.luts.entries;
  j["head"] = {{"weights", m.head.weights}, {"bias", m.head.bias}};
  j["optimizer"] = {{"step", ck.optimizer.step},       {"m_luts", ck.optimizer.m_luts},
                    {"v_luts", ck.optimizer.v_luts},   {"m_weights", ck.optimizer.m_weights},
                    {"v_weights", ck.optimizer.v_weights}, {"m_bias", ck.optimizer.m_bias},
                    {"v_bias", ck.optimizer.v_bias}};
  j["next_epoch"] = ck.next_epoch;
  j["best_metric"] = ck.best_metric;
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.value("format", "") != "glance-checkpoint") throw DataError("not a glance checkpoint");
    Checkpoint ck;
    auto& m = ck.model;
    m.config = config_from_json(j.at("config"), "config");
    m.config.validate();
    const int F = m.config.num_features();
    const int K = m.config.therm_bits;
    const int L = m.config.num_luts;
    m.thresholds = {F, K, j.at("thresholds").at("tau").get<std::vector<double>>(),
                    j.at("thresholds").at("fitted").get<bool>()};
    m.map = {L, m.config.addr_bits, m.config.num_bits(), j.at("connection_map").at("seed").get<std::uint64_t>(),
             j.at("connection_map").at("index").get<std::vector<std::uint32_t>>()};
    m.luts = {L, m.config.addr_bits, j.at("luts").get<std::vector<double>>()};
    m.head.latent = L;
    m.head.weights = j.at("head").at("weights").get<std::vector<double>>();
    m.head.bias = j.at("head").at("bias").get<Vec3>();
    if (m.thresholds.tau.size() != static_cast<std::size_t>(F) * K ||
        m.map.index.size() != static_cast<std::size_t>(L) * m.config.addr_bits ||
        m.luts.entries.size() != static_cast<std::size_t>(L) * m.config.table_size() ||
        m.head.weights.size() != 3 * static_cast<std::size_t>(L))
      throw DataError("checkpoint tensor sizes do not match its configuration");
    for (auto b : m.map.index)
      if (b >= static_cast<std::uint32_t>(m.config.num_bits())) throw DataError("connection map index out of range");
    const auto& o = j.at("optimizer");
    ck.optimizer.step = o.at("step").get<std::int64_t>();
    ck.optimizer.m_luts = o.at("m_luts").get<std::vector<double>>();
    ck.optimizer.v_luts = o.at("v_luts").get<std::vector<double>>();
    ck.optimizer.m_weights = o.at("m_weights").get<std::vector<double>>();
    ck.optimizer.v_weights = o.at("v_weights").get<std::vector<double>>();
    ck.optimizer.m_bias = o.at("m_bias").get<Vec3>();
    ck.optimizer.v_bias = o.at("v_bias").get<Vec3>();
    if (ck.optimizer.m_luts.size() != m.luts.entries.size() || ck.optimizer.m_weights.size() != m.head.weights.size())
      ck.optimizer = make_adam_state(m);
    ck.next_epoch = j.value("next_epoch", 0);
    ck.best_metric = j.value("best_metric", -1.0);
    return ck;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& p, const Checkpoint& ck) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  out << checkpoint_to_json(ck).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace glance::dwn
