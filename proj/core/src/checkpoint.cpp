#include "pmseg/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "pmseg/error.hpp"
#include "pmseg/hash.hpp"
#include "raw_io.hpp"

namespace pmseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kFormatVersion = 1;

json net_json(const NetConfig& n) {
  return {{"levels", n.levels},          {"base_channels", n.base_channels}, {"in_channels", n.in_channels},
          {"out_channels", n.out_channels}, {"kernel", n.kernel},           {"seed", n.seed},
          {"input_mean", n.input_mean},  {"input_std", n.input_std}};
}

NetConfig net_from(const json& j) {
  NetConfig n;
  n.levels = j.at("levels");
  n.base_channels = j.at("base_channels");
  n.in_channels = j.at("in_channels");
  n.out_channels = j.at("out_channels");
  n.kernel = j.at("kernel");
  n.seed = j.at("seed");
  n.input_mean = j.at("input_mean");
  n.input_std = j.at("input_std");
  n.validate();
  return n;
}

json put_tensor(const fs::path& dir, const std::string& rel, const Tensor& t) {
  const auto bytes = detail::encode_f64(t.data());
  detail::write_file(dir / rel, bytes);
  return {{"path", rel}, {"shape", t.shape()}, {"sha256", sha256_hex(bytes)}};
}

Tensor get_tensor(const fs::path& dir, const json& j, const Shape& expected) {
  const Shape shape = j.at("shape").get<Shape>();
  if (shape != expected)
    throw ConfigError((dir / j.at("path").get<std::string>()).string() + ": shape " + to_string(shape) +
                      " does not match the network, expected " + to_string(expected));
  const auto bytes =
      detail::read_checked(dir / j.at("path").get<std::string>(), element_count(shape) * 8, j.at("sha256"));
  return Tensor(shape, detail::decode_f64(bytes));
}

StopReason parse_reason(const std::string& s) {
  if (s == "max_steps") return StopReason::MaxSteps;
  if (s == "converged") return StopReason::Converged;
  if (s == "diverged") return StopReason::Diverged;
  throw ConfigError("checkpoint: unknown stop reason '" + s + "'");
}

}  // namespace

std::string net_config_to_json(const NetConfig& net) { return net_json(net).dump(2); }

NetConfig net_config_from_json(const std::string& text) {
  try {
    return net_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("net config: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  const TrainState& s = ckpt.state;
  const NetParams shape = zero_params(ckpt.net);
  if (s.params.names != shape.names) throw ConfigError("save_checkpoint: parameters do not match the network");
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  fs::create_directories(dir / "adam", ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());

  json params = json::array();
  for (std::size_t i = 0; i < s.params.count(); ++i) {
    const std::string& name = s.params.names[i];
    json e = put_tensor(dir, "params/" + name + ".f64", s.params.tensors[i]);
    e["name"] = name;
    if (i < s.adam.m.size()) {
      e["m"] = put_tensor(dir, "adam/" + name + ".m.f64", s.adam.m[i]);
      e["v"] = put_tensor(dir, "adam/" + name + ".v.f64", s.adam.v[i]);
    }
    params.push_back(e);
  }
  json header = {{"format_version", kFormatVersion},
                 {"net", net_json(ckpt.net)},
                 {"class_names", ckpt.class_names},
                 {"source", ckpt.source},
                 {"loss", ckpt.loss},
                 {"step", s.step},
                 {"phase", s.phase},
                 {"phase_start", s.phase_start},
                 {"finished", s.finished},
                 {"stop_reason", std::string(to_string(s.reason))},
                 {"losses", s.losses},
                 {"adam",
                  {{"step", s.adam.step},
                   {"lr", s.adam.lr},
                   {"beta1", s.adam.beta1},
                   {"beta2", s.adam.beta2},
                   {"eps", s.adam.eps}}},
                 {"params", params}};
  std::ofstream f(dir / "checkpoint.json", std::ios::binary | std::ios::trunc);
  f << header.dump(1) << "\n";
  if (!f) throw ConfigError("cannot write " + (dir / "checkpoint.json").string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path header_path = dir / "checkpoint.json";
  const auto raw = detail::read_file(header_path);
  json h;
  try {
    h = json::parse(reinterpret_cast<const char*>(raw.data()), reinterpret_cast<const char*>(raw.data()) + raw.size());
  } catch (const json::parse_error& e) {
    throw ConfigError(header_path.string() + ": malformed at byte offset " + std::to_string(e.byte));
  }
  try {
    if (h.at("format_version").get<int>() != kFormatVersion)
      throw ConfigError(header_path.string() + ": unsupported format_version");
    Checkpoint c;
    c.net = net_from(h.at("net"));
    c.class_names = h.at("class_names").get<std::vector<std::string>>();
    c.source = h.at("source").get<std::string>();
    c.loss = h.at("loss").get<std::string>();
    if (c.class_names.size() != c.net.out_channels)
      throw ConfigError(header_path.string() + ": " + std::to_string(c.class_names.size()) +
                        " class names for " + std::to_string(c.net.out_channels) + " output channels");
    TrainState& s = c.state;
    s.step = h.at("step");
    s.phase = h.at("phase");
    s.phase_start = h.at("phase_start");
    s.finished = h.at("finished");
    s.reason = parse_reason(h.at("stop_reason"));
    s.losses = h.at("losses").get<std::vector<double>>();
    const json& a = h.at("adam");
    s.adam.step = a.at("step");
    s.adam.lr = a.at("lr");
    s.adam.beta1 = a.at("beta1");
    s.adam.beta2 = a.at("beta2");
    s.adam.eps = a.at("eps");

    const NetParams shape = zero_params(c.net);
    const json& params = h.at("params");
    if (params.size() != shape.count())
      throw ConfigError(header_path.string() + ": " + std::to_string(params.size()) + " parameters, network needs " +
                        std::to_string(shape.count()));
    s.params.names = shape.names;
    for (std::size_t i = 0; i < shape.count(); ++i) {
      const json& e = params[i];
      if (e.at("name").get<std::string>() != shape.names[i])
        throw ConfigError(header_path.string() + ": parameter " + std::to_string(i) + " is '" +
                          e.at("name").get<std::string>() + "', expected '" + shape.names[i] + "'");
      const Shape& expected = shape.tensors[i].shape();
      s.params.tensors.push_back(get_tensor(dir, e, expected));
      if (e.contains("m")) {
        s.adam.m.push_back(get_tensor(dir, e.at("m"), expected));
        s.adam.v.push_back(get_tensor(dir, e.at("v"), expected));
      }
    }
    if (!s.adam.m.empty() && s.adam.m.size() != shape.count())
      throw ConfigError(header_path.string() + ": optimizer moments are incomplete");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(header_path.string() + ": " + e.what());
  }
}

}  // namespace pmseg
