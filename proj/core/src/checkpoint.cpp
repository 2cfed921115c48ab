#include "gesturelab/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gesturelab/error.hpp"
#include "gesturelab/io.hpp"

namespace gesturelab {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'G', 'L', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<uint64_t>(d)); }

uint32_t get_u32(const std::string& s, size_t& pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

uint64_t get_u64(const std::string& s, size_t& pos) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

double get_f64(const std::string& s, size_t& pos) { return std::bit_cast<double>(get_u64(s, pos)); }

json tensor_entry(const std::string& name, const std::string& role, const Tensor& t) {
  json e;
  e["name"] = name;
  e["role"] = role;
  e["shape"] = t.shape();
  return e;
}

void append_payload(std::string& out, const Tensor& t) {
  for (int64_t i = 0; i < t.numel(); ++i) put_f64(out, t[i]);
}

json rho_to_json(double rho) {
  if (std::isfinite(rho)) return rho;
  return nullptr;
}

double rho_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

}  // namespace

std::string checkpoint_filename(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch-%03d.ckpt", epoch);
  return buf;
}

void save_checkpoint(const std::filesystem::path& path, const TrainablePipeline& pipeline,
                     const Adam* optimizer, const CheckpointMeta& meta) {
  const ParamRegistry& reg = pipeline.params();
  json header;
  header["config"] = json::parse(pipeline_config_to_json(pipeline.config()));
  header["epoch"] = meta.epoch;
  header["monitor_rho"] = rho_to_json(meta.monitor_rho);

  json tensors = json::array();
  std::string payload;
  const auto params = reg.all();
  for (const Parameter* p : params) {
    tensors.push_back(tensor_entry(p->name, "param", p->value));
    append_payload(payload, p->value);
  }
  if (optimizer != nullptr) {
    const Adam& opt = *optimizer;
    json oj;
    oj["steps"] = optimizer->steps_taken();
    oj["learning_rate"] = optimizer->config().lr;
    oj["beta1"] = optimizer->config().beta1;
    oj["beta2"] = optimizer->config().beta2;
    oj["eps"] = optimizer->config().eps;
    header["optimizer"] = oj;
    check(opt.moment1().size() == params.size() && opt.moment2().size() == params.size(),
          ErrorKind::Integrity, "checkpoint: optimizer state does not match the registry");
    for (size_t i = 0; i < params.size(); ++i) {
      tensors.push_back(tensor_entry(params[i]->name, "adam_m", opt.moment1()[i]));
      append_payload(payload, opt.moment1()[i]);
    }
    for (size_t i = 0; i < params.size(); ++i) {
      tensors.push_back(tensor_entry(params[i]->name, "adam_v", opt.moment2()[i]));
      append_payload(payload, opt.moment2()[i]);
    }
  }
  header["tensors"] = std::move(tensors);

  std::string blob;
  blob.append(kMagic, 4);
  put_u32(blob, kVersion);
  const std::string head = header.dump();
  put_u64(blob, head.size());
  blob += head;
  blob += payload;
  write_text_file(path, blob);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::string blob = read_text_file(path);
  check(!blob.empty(), ErrorKind::Io, "checkpoint: empty file " + path.string());
  if (blob[0] == '{') {
    // best.ckpt reference record
    json j;
    try {
      j = json::parse(blob);
    } catch (const json::exception& e) {
      throw_error(ErrorKind::Integrity,
                  "checkpoint: unreadable reference record " + path.string() + ": " + e.what());
    }
    check(j.contains("file"), ErrorKind::Integrity,
          "checkpoint: reference record without a file field: " + path.string());
    return load_checkpoint(path.parent_path() / j["file"].get<std::string>());
  }
  check(blob.size() > 16 && std::memcmp(blob.data(), kMagic, 4) == 0, ErrorKind::Integrity,
        "checkpoint: bad magic in " + path.string());
  size_t pos = 4;
  const uint32_t version = get_u32(blob, pos);
  check(version == kVersion, ErrorKind::Integrity,
        "checkpoint: unsupported format version " + std::to_string(version));
  const uint64_t head_len = get_u64(blob, pos);
  check(pos + head_len <= blob.size(), ErrorKind::Integrity, "checkpoint: truncated header");
  json header;
  try {
    header = json::parse(blob.substr(pos, head_len));
  } catch (const json::exception& e) {
    throw_error(ErrorKind::Integrity, std::string("checkpoint: unreadable header: ") + e.what());
  }
  pos += head_len;

  LoadedCheckpoint out;
  out.config = pipeline_config_from_json(header.at("config").dump());
  out.meta.epoch = header.at("epoch").get<int>();
  out.meta.monitor_rho = rho_from_json(header.at("monitor_rho"));
  out.pipeline = std::make_unique<TrainablePipeline>(out.config);

  std::map<std::string, Tensor> m_by_name, v_by_name;
  for (const json& e : header.at("tensors")) {
    const std::string name = e.at("name").get<std::string>();
    const std::string role = e.at("role").get<std::string>();
    const Shape shape = e.at("shape").get<Shape>();
    const int64_t numel = shape_numel(shape);
    check(pos + static_cast<size_t>(numel) * 8 <= blob.size(), ErrorKind::Integrity,
          "checkpoint: truncated payload at tensor " + name);
    Tensor t(shape);
    for (int64_t i = 0; i < numel; ++i) t[i] = get_f64(blob, pos);
    if (role == "param") {
      Parameter* p = out.pipeline->params().find(name);
      check(p != nullptr, ErrorKind::Integrity,
            "checkpoint: parameter " + name + " does not exist in the rebuilt architecture");
      check(p->value.same_shape(t), ErrorKind::Integrity,
            "checkpoint: shape mismatch for parameter " + name);
      p->value = std::move(t);
    } else if (role == "adam_m") {
      m_by_name.emplace(name, std::move(t));
    } else if (role == "adam_v") {
      v_by_name.emplace(name, std::move(t));
    } else {
      throw_error(ErrorKind::Integrity, "checkpoint: unknown tensor role " + role);
    }
  }

  if (header.contains("optimizer")) {
    const json& oj = header.at("optimizer");
    out.has_optimizer = true;
    out.optimizer_steps = oj.at("steps").get<int64_t>();
    out.optimizer_config.lr = oj.at("learning_rate").get<double>();
    out.optimizer_config.beta1 = oj.at("beta1").get<double>();
    out.optimizer_config.beta2 = oj.at("beta2").get<double>();
    out.optimizer_config.eps = oj.at("eps").get<double>();
    for (const Parameter* p : out.pipeline->params().all()) {
      auto mi = m_by_name.find(p->name);
      auto vi = v_by_name.find(p->name);
      check(mi != m_by_name.end() && vi != v_by_name.end(), ErrorKind::Integrity,
            "checkpoint: missing optimizer state for " + p->name);
      out.adam_m.push_back(std::move(mi->second));
      out.adam_v.push_back(std::move(vi->second));
    }
  }
  return out;
}

void LoadedCheckpoint::restore_optimizer(Adam& optimizer) const {
  check(has_optimizer, ErrorKind::Argument,
        "checkpoint was saved without optimizer state; cannot resume");
  check(optimizer.moment1().size() == adam_m.size(), ErrorKind::Integrity,
        "checkpoint: optimizer slot count mismatch");
  for (size_t i = 0; i < adam_m.size(); ++i) {
    check(optimizer.moment1()[i].same_shape(adam_m[i]), ErrorKind::Integrity,
          "checkpoint: optimizer moment shape mismatch");
    optimizer.moment1()[i] = adam_m[i];
    optimizer.moment2()[i] = adam_v[i];
  }
  optimizer.set_steps_taken(optimizer_steps);
}

void write_best_record(const std::filesystem::path& dir, int epoch, double monitor_rho,
                       const std::string& filename) {
  json j;
  j["format"] = "best-ref";
  j["epoch"] = epoch;
  j["monitor_rho"] = rho_to_json(monitor_rho);
  j["file"] = filename;
  write_text_file(dir / "best.ckpt", j.dump(2) + "\n");
}

std::optional<BestRecord> read_best_record(const std::filesystem::path& dir) {
  const auto path = dir / "best.ckpt";
  if (!std::filesystem::exists(path)) return std::nullopt;
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception&) {
    return std::nullopt;
  }
  BestRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.monitor_rho = rho_from_json(j.at("monitor_rho"));
  r.filename = j.at("file").get<std::string>();
  return r;
}

}  // namespace gesturelab
