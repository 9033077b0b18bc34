// Copyright 2026 The amp-motion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amp/checkpoint.hpp"

#include "amp/errors.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace amp
{

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace
{
constexpr char kMagic[8] = {'A', 'M', 'P', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream & out, T v)
{
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream & in, const char * what)
{
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) {
    throw ParseError(std::string("checkpoint truncated while reading ") + what, 0);
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

nlohmann::json points_to_json(const std::vector<Point2D> & pts)
{
  nlohmann::json a = nlohmann::json::array();
  for (const Point2D & p : pts) {
    a.push_back({p.x, p.y});
  }
  return a;
}

std::vector<Point2D> points_from_json(const nlohmann::json & a)
{
  std::vector<Point2D> pts;
  for (const auto & p : a) {
    pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return pts;
}
}  // namespace

void save_checkpoint(const AmpModel & model, const std::string & path)
{
  nlohmann::json header;
  Config cfg;
  cfg.model = model.config;
  header["config"] = config_to_text(cfg);
  nlohmann::json longs = nlohmann::json::array();
  for (const auto & set : model.anchors.long_anchors) {
    longs.push_back(points_to_json(set));
  }
  header["long_anchors"] = longs;
  header["short_anchors"] = points_to_json(model.anchors.short_anchors);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.size()));
  for (const auto & [name, t] : model.params.items()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      put<std::uint64_t>(out, d);
    }
    for (double v : t.data()) {
      put<double>(out, v);
    }
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path);
  }
}

AmpModel load_checkpoint(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ParseError("not a checkpoint file: " + path, 0);
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  }
  const auto header_len = get<std::uint64_t>(in, "header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw ParseError("checkpoint truncated in header", 0);
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception & e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), 0);
  }
  const Config cfg = parse_config(header.at("config").get<std::string>());
  AmpModel model = AmpModel::create(cfg.model, 0);
  for (const auto & set : header.at("long_anchors")) {
    model.anchors.long_anchors.push_back(points_from_json(set));
  }
  model.anchors.short_anchors = points_from_json(header.at("short_anchors"));

  const auto count = get<std::uint32_t>(in, "tensor count");
  if (count != model.params.size()) {
    throw ParseError("checkpoint tensor count does not match the configured model", 0);
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw ParseError("checkpoint truncated in tensor name", 0);
    }
    if (!model.params.contains(name)) {
      throw ParseError("checkpoint has unknown tensor '" + name + "'", 0);
    }
    Tensor t = model.params.get(name);
    const auto rank = get<std::uint32_t>(in, "rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(get<std::uint64_t>(in, "dim"));
    }
    if (shape != t.shape()) {
      throw ParseError(
        "tensor '" + name + "' has shape " + shape_to_string(shape) + ", model expects " +
          shape_to_string(t.shape()),
        0);
    }
    for (double & v : t.mutable_data()) {
      v = get<double>(in, "tensor data");
    }
  }
  return model;
}

}  // namespace amp
