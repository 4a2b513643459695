/* Copyright 2026 The MFFCN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "mffcn/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mffcn/errors.hpp"
#include "mffcn/mten.hpp"

namespace mffcn {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'F', 'C'};

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void get(std::istream& in, unsigned char* dst, std::size_t n) {
  if (!in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n))) {
    throw FormatError("checkpoint: truncated file");
  }
}

struct Record {
  std::string name;
  Tensor value;
};

std::vector<Record> records_of(const MffcnModel<float>& model) {
  std::vector<Record> out;
  for (const auto& p : model.parameters()) out.push_back({p.name, p.value});
  for (const auto& [prefix, state] : model.batch_norm_states()) {
    out.push_back({prefix + ".running_mean", state.running_mean});
    out.push_back({prefix + ".running_var", state.running_var});
  }
  const ModelConfig& cfg = model.config();
  out.push_back({"meta.strategy",
                 Tensor({1}, {static_cast<float>(cfg.strategy)})});
  out.push_back({"meta.width_divisor",
                 Tensor({1}, {static_cast<float>(cfg.width_divisor)})});
  return out;
}

void copy_into(Tensor target, const Tensor& source, const std::string& name) {
  if (target.shape() != source.shape()) {
    throw FormatError("checkpoint: " + name + " has shape " +
                      shape_string(source.shape()) + ", model expects " +
                      shape_string(target.shape()));
  }
  std::ranges::copy(source.data(), target.mutable_data().begin());
}

std::size_t meta_value(std::map<std::string, Tensor>& records,
                       const std::string& name, std::size_t upper) {
  auto it = records.find(name);
  if (it == records.end()) throw FormatError("checkpoint: missing " + name);
  const float v = it->second.size() == 1 ? it->second.at(0) : -1.0f;
  if (v < 0 || v > static_cast<float>(upper) || v != std::floor(v)) {
    throw FormatError("checkpoint: invalid " + name);
  }
  records.erase(it);
  return static_cast<std::size_t>(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const MffcnModel<float>& model) {
  const std::vector<Record> records = records_of(model);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kCheckpointVersion));
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const Record& r : records) {
    if (r.name.size() > 0xffff) throw FormatError("checkpoint: name too long");
    put_u16(out, static_cast<std::uint16_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    write_mten(out, r.value);
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

MffcnModel<float> read_checkpoint(std::istream& in) {
  unsigned char head[9];
  get(in, head, 9);
  if (std::memcmp(head, kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic (expected MFFC)");
  }
  if (head[4] != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(head[4]));
  }
  const std::uint32_t count = std::uint32_t(head[5]) |
                              (std::uint32_t(head[6]) << 8) |
                              (std::uint32_t(head[7]) << 16) |
                              (std::uint32_t(head[8]) << 24);
  std::map<std::string, Tensor> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    unsigned char len[2];
    get(in, len, 2);
    std::string name(std::size_t(len[0]) | (std::size_t(len[1]) << 8), '\0');
    get(in, reinterpret_cast<unsigned char*>(name.data()), name.size());
    if (!records.emplace(name, read_mten(in)).second) {
      throw FormatError("checkpoint: duplicate record " + name);
    }
  }

  ModelConfig cfg;
  cfg.strategy = static_cast<FusionStrategy>(
      meta_value(records, "meta.strategy", kAllStrategies.size() - 1));
  cfg.width_divisor = meta_value(records, "meta.width_divisor", 64);
  try {
    validate_width_divisor(cfg.width_divisor);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }

  MffcnModel<float> model(cfg, 0);
  auto take = [&](const std::string& name, const Tensor& target) {
    auto it = records.find(name);
    if (it == records.end()) {
      throw FormatError("checkpoint: missing record " + name);
    }
    copy_into(target, it->second, name);
    records.erase(it);
  };
  for (const auto& p : model.parameters()) take(p.name, p.value);
  for (auto& [prefix, state] : model.batch_norm_states()) {
    take(prefix + ".running_mean", state.running_mean);
    take(prefix + ".running_var", state.running_var);
  }
  if (!records.empty()) {
    throw FormatError("checkpoint: unexpected record " +
                      records.begin()->first + " for strategy " +
                      std::string(strategy_name(cfg.strategy)));
  }
  return model;
}

void save_checkpoint(const std::filesystem::path& path,
                     const MffcnModel<float>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, model);
}

MffcnModel<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_checkpoint(in);
}

bool identical_models(const MffcnModel<float>& a, const MffcnModel<float>& b) {
  const std::vector<Record> ra = records_of(a), rb = records_of(b);
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].name != rb[i].name || ra[i].value.shape() != rb[i].value.shape())
      return false;
    const auto x = ra[i].value.data(), y = rb[i].value.data();
    if (std::memcmp(x.data(), y.data(), x.size_bytes()) != 0) return false;
  }
  return true;
}

}  // namespace mffcn
