#include "avi/checkpoint.hpp"

#include <cstdio>

#include "avi/io.hpp"

namespace avi::train {

namespace fs = std::filesystem;

namespace {

struct Entry {
  std::string name;
  std::string file;
  const nn::Param* param = nullptr;
  const std::vector<float>* moment = nullptr;
  int rows = 0, cols = 0;
};

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

io::Tensor tensor_of(const std::vector<float>& data, int rows, int cols) {
  io::Tensor t;
  t.dims = {static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols)};
  t.f32 = data;
  return t;
}

void add_store(std::vector<Entry>& out, const std::string& prefix, const nn::ParamStore& store, const nn::Adam* opt) {
  for (const auto& p : store.all()) {
    const std::string name = prefix + "." + p.name;
    out.push_back({name, name + ".avk", &p, nullptr, p.rows, p.cols});
  }
  if (!opt) return;
  for (const auto& p : store.all()) {
    auto m = opt->first().find(p.name);
    auto s = opt->second().find(p.name);
    if (m == opt->first().end() || s == opt->second().end()) continue;
    out.push_back({"adam." + prefix + ".m." + p.name, "adam." + prefix + ".m." + p.name + ".avk", nullptr, &m->second,
                   p.rows, p.cols});
    out.push_back({"adam." + prefix + ".v." + p.name, "adam." + prefix + ".v." + p.name + ".avk", nullptr, &s->second,
                   p.rows, p.cols});
  }
}

}  // namespace

nlohmann::json architecture(const TrainConfig& c) {
  nlohmann::json j;
  j["backbone"] = c.backbone;
  j["gamr"] = c.gamr;
  return j;
}

std::string save_checkpoint(const fs::path& dir, const CheckpointView& v) {
  require(v.config && v.step && v.backbone && v.gamr, "checkpoint view is incomplete");
  fs::create_directories(dir);
  std::vector<Entry> entries;
  add_store(entries, "backbone", *v.backbone, v.opt_backbone);
  add_store(entries, "gamr", *v.gamr, v.opt_gamr);

  nlohmann::json tensors = nlohmann::json::array();
  std::uint32_t crc = 0;
  for (const auto& e : entries) {
    const auto& data = e.param ? e.param->value : *e.moment;
    const auto bytes = io::encode_avk(tensor_of(data, e.rows, e.cols));
    io::write_bytes(dir / e.file, bytes);
    // Over names and raw values: each AVK1 file ends in its own CRC, and a CRC
    // run across data followed by its CRC settles to a constant.
    crc = io::crc32_update(crc, reinterpret_cast<const std::uint8_t*>(e.name.data()), e.name.size());
    crc = io::crc32_update(crc, reinterpret_cast<const std::uint8_t*>(data.data()), data.size() * sizeof(float));
    tensors.push_back({{"name", e.name}, {"file", e.file}, {"shape", {e.rows, e.cols}}, {"dtype", "f32"},
                       {"bytes", bytes.size()}});
  }
  nlohmann::json j;
  j["format"] = "avi-checkpoint-1";
  j["step"] = *v.step;
  j["adam_steps"] = {{"backbone", v.opt_backbone ? v.opt_backbone->steps() : 0},
                     {"gamr", v.opt_gamr ? v.opt_gamr->steps() : 0}};
  j["config"] = *v.config;
  j["architecture"] = architecture(*v.config);
  j["parameter_count"] = {{"backbone", v.backbone->count()}, {"gamr", v.gamr->count()}};
  j["tensors"] = tensors;
  // The step counter is part of the content.
  const std::string step = std::to_string(*v.step);
  crc = io::crc32_update(crc, reinterpret_cast<const std::uint8_t*>(step.data()),
                         step.size());
  j["checksum"] = hex32(crc);
  io::write_text(dir / "params.json", j.dump(2) + "\n");
  return j["checksum"];
}

std::string checkpoint_checksum(const fs::path& dir) {
  return nlohmann::json::parse(io::read_text(dir / "params.json")).at("checksum").get<std::string>();
}

void load_checkpoint(const fs::path& dir, CheckpointView& v) {
  require(v.config && v.step && v.backbone && v.gamr, "checkpoint view is incomplete");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(dir / "params.json"));
  } catch (const nlohmann::json::parse_error& e) {
    fail(dir.string(), ": corrupt params.json: ", e.what());
  }
  if (j.value("format", "") != "avi-checkpoint-1") fail(dir.string(), ": not a checkpoint (bad format tag)");
  const auto want = architecture(*v.config);
  if (j.at("architecture") != want)
    fail(dir.string(), ": architecture mismatch: checkpoint has ", j.at("architecture").dump(), " but config wants ",
         want.dump());

  std::map<std::string, nn::Param*> params;
  for (auto& p : v.backbone->all()) params["backbone." + p.name] = &p;
  for (auto& p : v.gamr->all()) params["gamr." + p.name] = &p;

  std::map<std::string, std::vector<float>> loaded;
  std::uint32_t crc = 0;
  std::size_t param_hits = 0;
  for (const auto& t : j.at("tensors")) {
    const std::string name = t.at("name");
    const auto bytes = io::read_bytes(dir / t.at("file").get<std::string>());
    const io::Tensor tensor = io::decode_avk(bytes, name);
    crc = io::crc32_update(crc, reinterpret_cast<const std::uint8_t*>(name.data()), name.size());
    crc = io::crc32_update(crc, reinterpret_cast<const std::uint8_t*>(tensor.f32.data()),
                           tensor.f32.size() * sizeof(float));
    const int rows = t.at("shape")[0], cols = t.at("shape")[1];
    if (tensor.dims.size() != 2 || static_cast<int>(tensor.dims[0]) != rows || static_cast<int>(tensor.dims[1]) != cols)
      fail(name, ": tensor shape disagrees with params.json");
    if (name.rfind("adam.", 0) != 0) {
      auto it = params.find(name);
      if (it == params.end()) fail(dir.string(), ": architecture mismatch: unexpected parameter ", name);
      if (it->second->rows != rows || it->second->cols != cols)
        fail(dir.string(), ": architecture mismatch: ", name, " has shape ", std::to_string(rows), "x",
             std::to_string(cols));
      ++param_hits;
    }
    loaded[name] = tensor.f32;
  }
  if (param_hits != params.size()) fail(dir.string(), ": architecture mismatch: parameter count differs");
  const long long step = j.at("step").get<long long>();
  const std::string s = std::to_string(step);
  crc = io::crc32_update(crc, reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  if (hex32(crc) != j.at("checksum").get<std::string>())
    fail(dir.string(), ": checkpoint checksum mismatch");

  for (auto& [name, p] : params) p->value = loaded.at(name);
  auto restore = [&](nn::Adam* opt, const nn::ParamStore& store, const std::string& prefix, long long steps) {
    if (!opt) return;
    opt->first().clear();
    opt->second().clear();
    for (const auto& p : store.all()) {
      auto m = loaded.find("adam." + prefix + ".m." + p.name);
      auto s2 = loaded.find("adam." + prefix + ".v." + p.name);
      if (m != loaded.end() && s2 != loaded.end()) {
        opt->first()[p.name] = m->second;
        opt->second()[p.name] = s2->second;
      }
    }
    opt->set_steps(steps);
  };
  restore(v.opt_backbone, *v.backbone, "backbone", j.at("adam_steps").at("backbone").get<long long>());
  restore(v.opt_gamr, *v.gamr, "gamr", j.at("adam_steps").at("gamr").get<long long>());
  *v.step = step;
}

}  // namespace avi::train
