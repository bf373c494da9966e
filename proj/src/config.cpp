#include "avi/config.hpp"

#include <set>

#include "avi/io.hpp"

namespace avi {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) fail(where, ": expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) fail(where, ": unknown key '", k, "'");
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

namespace world {

void to_json(nlohmann::json& j, const WorldScale& s) {
  j = {{"frames", s.frames}, {"height", s.height}, {"width", s.width}, {"fps", s.fps}, {"sample_rate", s.sample_rate}};
}

void from_json(const nlohmann::json& j, WorldScale& s) {
  check_keys(j, {"frames", "height", "width", "fps", "sample_rate"}, "scale");
  read(j, "frames", s.frames);
  read(j, "height", s.height);
  read(j, "width", s.width);
  read(j, "fps", s.fps);
  read(j, "sample_rate", s.sample_rate);
}

}  // namespace world

namespace model {

void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = {{"model_dim", c.model_dim},     {"heads", c.heads},         {"blocks", c.blocks},
       {"text_vocab", c.text_vocab},   {"audio_bands", c.audio_bands}, {"max_tokens", c.max_tokens},
       {"audio_window", c.audio_window}, {"latent_dim", c.latent_dim}, {"patch", c.patch}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
  check_keys(j, {"model_dim", "heads", "blocks", "text_vocab", "audio_bands", "max_tokens", "audio_window",
                 "latent_dim", "patch"},
             "backbone config");
  read(j, "model_dim", c.model_dim);
  read(j, "heads", c.heads);
  read(j, "blocks", c.blocks);
  read(j, "text_vocab", c.text_vocab);
  read(j, "audio_bands", c.audio_bands);
  read(j, "max_tokens", c.max_tokens);
  read(j, "audio_window", c.audio_window);
  read(j, "latent_dim", c.latent_dim);
  read(j, "patch", c.patch);
}

}  // namespace model

namespace refiner {

void to_json(nlohmann::json& j, const RefinerConfig& c) {
  j = {{"model_dim", c.model_dim},       {"heads", c.heads},           {"blocks", c.blocks},
       {"audio_bands", c.audio_bands},   {"audio_window", c.audio_window}, {"latent_dim", c.latent_dim},
       {"max_precision", c.max_precision}, {"source_tokens", c.source_tokens}};
}

void from_json(const nlohmann::json& j, RefinerConfig& c) {
  check_keys(j, {"model_dim", "heads", "blocks", "audio_bands", "audio_window", "latent_dim", "max_precision",
                 "source_tokens"},
             "gamr config");
  read(j, "model_dim", c.model_dim);
  read(j, "heads", c.heads);
  read(j, "blocks", c.blocks);
  read(j, "audio_bands", c.audio_bands);
  read(j, "audio_window", c.audio_window);
  read(j, "latent_dim", c.latent_dim);
  read(j, "max_precision", c.max_precision);
  read(j, "source_tokens", c.source_tokens);
}

}  // namespace refiner

namespace train {

void TrainConfig::validate() const {
  require(lambda >= 0.0, "lambda must be >= 0");
  require(steps >= 1, "steps must be >= 1");
  require(batch >= 1, "batch must be >= 1");
  require(lr > 0.0, "lr must be positive");
  require(sampler_steps >= 1, "sampler steps must be >= 1");
  require(dataset_size >= 1, "dataset size must be >= 1");
  require(train_count >= 1 && train_count <= dataset_size, "train split must lie within the dataset");
  require(cond_dropout >= 0.0 && cond_dropout <= 1.0, "condition dropout must lie in [0,1]");
  require(bbox_prob >= 0.0 && bbox_prob <= 1.0, "bbox probability must lie in [0,1]");
  require(max_unmasked >= 0 && max_unmasked < scale.frames, "max unmasked frames must be < frames");
  require(checkpoint_interval >= 0, "checkpoint interval must be >= 0");
  require(scale.height % backbone.patch == 0 && scale.width % backbone.patch == 0,
          "scene size must be divisible by the patch size");
  require(backbone.latent_dim == backbone.patch * backbone.patch * 3, "latent dim must equal s*s*3");
  require(gamr.latent_dim == backbone.latent_dim, "gamr latent dim must match the backbone");
  require(gamr.audio_bands == backbone.audio_bands, "gamr audio bands must match the backbone");
}

std::string to_string(Objective o) { return o == Objective::joint ? "joint" : "fm_only"; }

Objective parse_objective(const std::string& s) {
  if (s == "joint") return Objective::joint;
  if (s == "fm_only") return Objective::fm_only;
  fail("unknown objective '", s, "' (expected joint or fm_only)");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json::object();
  j["lambda"] = c.lambda;
  j["lr"] = c.lr;
  j["paper_lr"] = c.paper_lr;
  j["steps"] = c.steps;
  j["batch"] = c.batch;
  j["seed"] = c.seed;
  j["sampler_steps"] = c.sampler_steps;
  j["schedule"] = refiner::to_string(c.schedule);
  j["dataset_size"] = c.dataset_size;
  j["train_count"] = c.train_count;
  j["scale"] = c.scale;
  j["backbone"] = c.backbone;
  j["gamr"] = c.gamr;
  j["registry"] = {{"separator_speech", c.separator_speech},
                   {"separator_non_speech", c.separator_non_speech},
                   {"generator_speech", c.generator_speech},
                   {"generator_music", c.generator_music},
                   {"generator_sound", c.generator_sound}};
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["cond_dropout"] = c.cond_dropout;
  j["bbox_prob"] = c.bbox_prob;
  j["max_unmasked"] = c.max_unmasked;
  j["fixed_draws"] = c.fixed_draws;
  j["objective"] = to_string(c.objective);
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  check_keys(j, {"lambda", "lr", "paper_lr", "steps", "batch", "seed", "sampler_steps", "schedule", "dataset_size",
                 "train_count", "scale", "backbone", "gamr", "registry", "checkpoint_interval", "cond_dropout",
                 "bbox_prob", "max_unmasked", "fixed_draws", "objective"},
             "config");
  read(j, "lambda", c.lambda);
  read(j, "lr", c.lr);
  read(j, "paper_lr", c.paper_lr);
  read(j, "steps", c.steps);
  read(j, "batch", c.batch);
  read(j, "seed", c.seed);
  read(j, "sampler_steps", c.sampler_steps);
  if (j.contains("schedule")) c.schedule = refiner::parse_schedule(j.at("schedule").get<std::string>());
  read(j, "dataset_size", c.dataset_size);
  read(j, "train_count", c.train_count);
  read(j, "scale", c.scale);
  read(j, "backbone", c.backbone);
  read(j, "gamr", c.gamr);
  if (j.contains("registry")) {
    const auto& r = j.at("registry");
    check_keys(r, {"separator_speech", "separator_non_speech", "generator_speech", "generator_music",
                   "generator_sound"},
               "registry");
    read(r, "separator_speech", c.separator_speech);
    read(r, "separator_non_speech", c.separator_non_speech);
    read(r, "generator_speech", c.generator_speech);
    read(r, "generator_music", c.generator_music);
    read(r, "generator_sound", c.generator_sound);
  }
  read(j, "checkpoint_interval", c.checkpoint_interval);
  read(j, "cond_dropout", c.cond_dropout);
  read(j, "bbox_prob", c.bbox_prob);
  read(j, "max_unmasked", c.max_unmasked);
  read(j, "fixed_draws", c.fixed_draws);
  if (j.contains("objective")) c.objective = parse_objective(j.at("objective").get<std::string>());
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    from_json(j, c);
  } catch (const nlohmann::json::exception& e) {
    fail("config: ", e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(path, ": invalid JSON: ", e.what());
  }
  return config_from_json(j);
}

}  // namespace train
}  // namespace avi
