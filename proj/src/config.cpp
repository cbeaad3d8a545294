#include "ualab/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ualab/digest.hpp"

namespace ualab {

namespace {

using nlohmann::json;

json gen_to_json(const GenConfig& g) {
  return json{{"d_in", g.d_in},
              {"n_min", g.n_range.first},
              {"n_max", g.n_range.second},
              {"transition_quantile_lo", g.transition_quantile_range.first},
              {"transition_quantile_hi", g.transition_quantile_range.second},
              {"noise_sigma", g.noise_sigma},
              {"regime_shift", g.regime_shift},
              {"clip_stride", g.clip_stride},
              {"seed", g.seed}};
}

void gen_from_json(const json& j, GenConfig& g) {
  j.at("d_in").get_to(g.d_in);
  j.at("n_min").get_to(g.n_range.first);
  j.at("n_max").get_to(g.n_range.second);
  j.at("transition_quantile_lo").get_to(g.transition_quantile_range.first);
  j.at("transition_quantile_hi").get_to(g.transition_quantile_range.second);
  j.at("noise_sigma").get_to(g.noise_sigma);
  j.at("regime_shift").get_to(g.regime_shift);
  j.at("clip_stride").get_to(g.clip_stride);
  j.at("seed").get_to(g.seed);
}

json semantic_json(const RunConfig& c) {
  json j;
  j["gen"] = gen_to_json(c.gen);
  j["counts"] = {{"pretrain", c.counts.pretrain},
                 {"labeled_train", c.counts.labeled_train},
                 {"labeled_test", c.counts.labeled_test}};
  j["dims"] = {{"d_in", c.dims.d_in},
               {"enc_hidden", c.dims.enc_hidden},
               {"d_f", c.dims.d_f},
               {"proj_hidden", c.dims.proj_hidden},
               {"d_z", c.dims.d_z},
               {"order_hidden", c.dims.order_hidden},
               {"perm_hidden", c.dims.perm_hidden}};
  j["temperature"] = c.temperature;
  j["pretrain"] = {{"steps", c.pretrain.steps},
                   {"batch_videos", c.pretrain.batch_videos},
                   {"scope", to_string(c.pretrain.scope)},
                   {"mode", to_string(c.pretrain.mode)},
                   {"optimizer",
                    c.pretrain.optimizer == OptKind::Adam ? "adam" : "sgd"},
                   {"lr", c.pretrain.lr}};
  j["eval"] = {{"stride", c.eval.stride},
               {"window", c.eval.window},
               {"thresholds", c.eval.thresholds},
               {"horizon", c.eval.horizon},
               {"probe_steps", c.eval.probe.steps},
               {"probe_lr", c.eval.probe.lr},
               {"finetune_lr", c.eval.probe.finetune_lr}};
  j["labeled_fraction"] = c.labeled_fraction;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

std::string to_json(const RunConfig& c) {
  json j = semantic_json(c);
  j["out_dir"] = c.out_dir;
  j["threads"] = c.threads;
  return j.dump(2);
}

std::string to_canonical_json(const RunConfig& c) {
  return semantic_json(c).dump(2);
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("bad config json: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("gen")) gen_from_json(j.at("gen"), c.gen);
    if (j.contains("counts")) {
      const auto& counts = j.at("counts");
      counts.at("pretrain").get_to(c.counts.pretrain);
      counts.at("labeled_train").get_to(c.counts.labeled_train);
      counts.at("labeled_test").get_to(c.counts.labeled_test);
    }
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      d.at("d_in").get_to(c.dims.d_in);
      d.at("enc_hidden").get_to(c.dims.enc_hidden);
      d.at("d_f").get_to(c.dims.d_f);
      d.at("proj_hidden").get_to(c.dims.proj_hidden);
      d.at("d_z").get_to(c.dims.d_z);
      d.at("order_hidden").get_to(c.dims.order_hidden);
      d.at("perm_hidden").get_to(c.dims.perm_hidden);
    }
    if (j.contains("temperature")) j.at("temperature").get_to(c.temperature);
    if (j.contains("pretrain")) {
      const auto& p = j.at("pretrain");
      p.at("steps").get_to(c.pretrain.steps);
      p.at("batch_videos").get_to(c.pretrain.batch_videos);
      c.pretrain.scope = scope_from_string(p.at("scope").get<std::string>());
      c.pretrain.mode = loss_mode_from_string(p.at("mode").get<std::string>());
      c.pretrain.optimizer = p.at("optimizer").get<std::string>() == "adam"
                                 ? OptKind::Adam
                                 : OptKind::Sgd;
      p.at("lr").get_to(c.pretrain.lr);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      e.at("stride").get_to(c.eval.stride);
      e.at("window").get_to(c.eval.window);
      e.at("thresholds").get_to(c.eval.thresholds);
      e.at("horizon").get_to(c.eval.horizon);
      e.at("probe_steps").get_to(c.eval.probe.steps);
      e.at("probe_lr").get_to(c.eval.probe.lr);
      e.at("finetune_lr").get_to(c.eval.probe.finetune_lr);
    }
    if (j.contains("labeled_fraction")) {
      j.at("labeled_fraction").get_to(c.labeled_fraction);
    }
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("out_dir")) j.at("out_dir").get_to(c.out_dir);
    if (j.contains("threads")) j.at("threads").get_to(c.threads);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("bad config field: ") + e.what());
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::string config_digest(const RunConfig& c) {
  return digest_string(semantic_json(c).dump());
}

}  // namespace ualab
