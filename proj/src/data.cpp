/* Copyright 2026 The dwv Authors. All Rights Reserved.

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
#include "dwv/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dwv/io.hpp"
#include "dwv/nn.hpp"

namespace dwv {

namespace fs = std::filesystem;
using nlohmann::json;

void LabeledDataset::validate() const {
  if (labels.empty()) throw Error(Errc::kInvalidArgument, "dataset is empty");
  if (images.size() != labels.size() * static_cast<std::size_t>(shape.size()))
    throw Error(Errc::kShapeMismatch, "image payload does not match N*C*H*W");
  if (num_classes < 1) throw Error(Errc::kInvalidArgument, "num_classes must be >= 1");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw Error(Errc::kLabelOutOfRange,
                  "label out of range at sample " + std::to_string(i) + ": " +
                      std::to_string(labels[i]));
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    const float p = images[i];
    if (!(p >= 0.0f && p <= 1.0f))
      throw Error(Errc::kPixelOutOfRange,
                  "pixel out of range at sample " +
                      std::to_string(i / static_cast<std::size_t>(shape.size())));
  }
}

Mat LabeledDataset::batch(std::span<const std::size_t> indices) const {
  const int d = shape.size();
  Mat out(static_cast<Eigen::Index>(indices.size()), d);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const float* src = images.data() + indices[r] * d;
    std::copy(src, src + d, out.row(static_cast<Eigen::Index>(r)).data());
  }
  return out;
}

Mat LabeledDataset::all() const {
  return ConstMatMap(images.data(), static_cast<Eigen::Index>(size()), shape.size());
}

std::vector<int> LabeledDataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) out[r] = labels[indices[r]];
  return out;
}

std::vector<std::size_t> LabeledDataset::class_indices(int cls) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == cls) out.push_back(i);
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.name = name;
  out.shape = shape;
  out.num_classes = num_classes;
  out.labels = batch_labels(indices);
  out.images.resize(indices.size() * shape.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = image(indices[r]);
    std::copy(src.begin(), src.end(), out.images.begin() + r * shape.size());
  }
  return out;
}

LabeledDataset ProtectedDataset::base() const {
  LabeledDataset out = released;
  const auto d = static_cast<std::size_t>(released.shape.size());
  for (std::size_t j = 0; j < split.selected_indices.size(); ++j) {
    auto img = out.image(split.selected_indices[j]);
    for (std::size_t p = 0; p < d; ++p)
      img[p] = std::clamp(img[p] - deltas[j * d + p], 0.0f, 1.0f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic task

SyntheticSpec parse_synthetic_spec(const std::string& spec) {
  const std::string prefix = "shapes:";
  if (spec.rfind(prefix, 0) != 0)
    throw Error(Errc::kInvalidArgument, "synthetic spec must start with 'shapes:'");
  SyntheticSpec out;
  std::stringstream ss(spec.substr(prefix.size()));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::kInvalidArgument, "malformed synthetic spec field: " + item);
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    try {
      if (key == "k") out.num_classes = std::stoi(val);
      else if (key == "n") out.n = std::stoi(val);
      else if (key == "hw") out.height = out.width = std::stoi(val);
      else if (key == "h") out.height = std::stoi(val);
      else if (key == "w") out.width = std::stoi(val);
      else if (key == "seed") out.seed = std::stoull(val);
      else throw Error(Errc::kInvalidArgument, "unknown synthetic spec key: " + key);
    } catch (const std::logic_error&) {
      throw Error(Errc::kInvalidArgument, "malformed synthetic spec value: " + item);
    }
  }
  return out;
}

namespace {

constexpr int kNumGlyphs = 10;

bool glyph_covers(int glyph, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  switch (glyph) {
    case 0: return u * u + v * v <= 1.0;                                   // disk
    case 1: return std::max(au, av) <= 0.8;                                // square
    case 2: return v >= -0.9 && v <= 0.8 && au <= (v + 0.9) / 1.7 * 0.95;  // triangle
    case 3: return (au <= 0.3 && av <= 1.0) || (av <= 0.3 && au <= 1.0);  // plus
    case 4: {                                                              // ring
      const double r = std::sqrt(u * u + v * v);
      return r >= 0.55 && r <= 1.0;
    }
    case 5: return au + av <= 1.0;                                         // diamond
    case 6: return (std::abs(u - v) <= 0.4 || std::abs(u + v) <= 0.4) &&   // cross
                   std::max(au, av) <= 0.9;
    case 7: return au <= 0.9 && (std::abs(v - 0.5) <= 0.22 || std::abs(v + 0.5) <= 0.22);
    case 8: return av <= 0.9 && (std::abs(u - 0.5) <= 0.22 || std::abs(u + 0.5) <= 0.22);
    case 9: return (std::abs(v + 0.7) <= 0.25 && au <= 0.9) ||
                   (au <= 0.25 && v >= -0.9 && v <= 0.9);
    default: return false;
  }
}

void render_glyph(int glyph, const ImageShape& s, Rng& rng, std::span<float> out) {
  const double scale = std::min(s.h, s.w);
  const double radius = rng.uniform(0.28, 0.38) * scale;
  const double jitter = 0.12 * scale;
  const double cx = 0.5 * s.w + rng.uniform(-jitter, jitter);
  const double cy = 0.5 * s.h + rng.uniform(-jitter, jitter);

  float bg[3], fg[3];
  for (;;) {
    double dist2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      bg[c] = static_cast<float>(rng.uniform());
      fg[c] = static_cast<float>(rng.uniform());
      dist2 += (bg[c] - fg[c]) * (bg[c] - fg[c]);
    }
    if (dist2 >= 0.25) break;
  }

  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      // 2x2 supersampled coverage.
      int hits = 0;
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx) {
          const double u = (x + 0.25 + 0.5 * sx - cx) / radius;
          const double v = (y + 0.25 + 0.5 * sy - cy) / radius;
          hits += glyph_covers(glyph, u, v) ? 1 : 0;
        }
      const float a = static_cast<float>(hits) / 4.0f;
      for (int c = 0; c < s.c; ++c) {
        const int cc = c % 3;
        const float noise = static_cast<float>(rng.uniform(-0.06, 0.06));
        const float p = bg[cc] * (1.0f - a) + fg[cc] * a + noise;
        out[(c * s.h + y) * s.w + x] = std::clamp(p, 0.0f, 1.0f);
      }
    }
  }
}

}  // namespace

LabeledDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > kNumGlyphs)
    throw Error(Errc::kInvalidArgument, "synthetic task needs 2 <= K <= 10");
  if (spec.n < spec.num_classes)
    throw Error(Errc::kInvalidArgument, "synthetic task needs N >= K");
  if (spec.height < 8 || spec.width < 8)
    throw Error(Errc::kInvalidArgument, "synthetic task needs H, W >= 8");

  LabeledDataset ds;
  std::ostringstream name;
  name << "shapes:k=" << spec.num_classes << ",n=" << spec.n << ",h=" << spec.height
       << ",w=" << spec.width << ",seed=" << spec.seed;
  ds.name = name.str();
  ds.shape = {3, spec.height, spec.width};
  ds.num_classes = spec.num_classes;
  ds.labels.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) ds.labels[i] = i % spec.num_classes;
  Rng rng(spec.seed);
  rng.shuffle(ds.labels);
  ds.images.resize(static_cast<std::size_t>(spec.n) * ds.shape.size());
  for (int i = 0; i < spec.n; ++i) render_glyph(ds.labels[i], ds.shape, rng, ds.image(i));
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::vector<std::uint8_t> encode_labels(const std::vector<int>& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(labels.size() * 2);
  for (int l : labels) io::append_u16(out, static_cast<std::uint16_t>(l));
  return out;
}

std::vector<std::uint8_t> encode_floats(std::span<const float> v) {
  std::vector<std::uint8_t> out;
  io::append_f32(out, v);
  return out;
}

std::string digest_of(std::span<const std::uint8_t> images,
                      std::span<const std::uint8_t> labels,
                      std::span<const std::uint8_t> deltas) {
  io::Sha256 h;
  h.update(images);
  h.update(labels);
  h.update(deltas);
  return h.hex();
}

struct RawDir {
  json manifest;
  LabeledDataset ds;
  std::vector<std::uint8_t> image_bytes, label_bytes, delta_bytes;
};

RawDir read_dir(const fs::path& dir) {
  RawDir raw;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw Error(Errc::kMissingFile, "missing file: " + manifest_path.string());
  try {
    raw.manifest = json::parse(io::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw Error(Errc::kBadMagic, std::string("corrupt manifest: ") + e.what());
  }
  const json& m = raw.manifest;
  if (!m.is_object() || !m.contains("format_version") || m["format_version"] != 1)
    throw Error(Errc::kBadMagic, "manifest format_version missing or unsupported");

  try {
    const auto n = m.at("n").get<std::size_t>();
    const auto shape = m.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) throw Error(Errc::kShapeMismatch, "manifest shape must be [C,H,W]");
    raw.ds.shape = {shape[0], shape[1], shape[2]};
    raw.ds.num_classes = m.at("k").get<int>();
    raw.ds.name = m.value("name", dir.filename().string());

    raw.image_bytes = io::read_file(dir / "images.bin");
    raw.label_bytes = io::read_file(dir / "labels.bin");
    if (fs::exists(dir / "deltas.bin")) raw.delta_bytes = io::read_file(dir / "deltas.bin");

    const std::size_t d = raw.ds.shape.size();
    if (raw.image_bytes.size() != n * d * 4)
      throw Error(Errc::kManifestInconsistent,
                  "manifest inconsistent with payload: images.bin size");
    if (raw.label_bytes.size() != n * 2)
      throw Error(Errc::kManifestInconsistent,
                  "manifest inconsistent with payload: labels.bin size");
    raw.ds.images.resize(n * d);
    io::ByteReader(raw.image_bytes).f32(raw.ds.images);
    raw.ds.labels.resize(n);
    io::ByteReader lr(raw.label_bytes);
    for (auto& l : raw.ds.labels) l = lr.u16();
  } catch (const json::exception& e) {
    throw Error(Errc::kManifestInconsistent, std::string("manifest field error: ") + e.what());
  }
  raw.ds.validate();
  return raw;
}

LabeledDataset load_cifar_binary(const fs::path& path) {
  auto bytes = io::read_file(path);
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  if (bytes.empty() || bytes.size() % kRecord != 0)
    throw Error(Errc::kBadMagic, "not a CIFAR-10 binary batch: " + path.string());
  LabeledDataset ds;
  ds.name = path.filename().string();
  ds.shape = {3, 32, 32};
  ds.num_classes = 10;
  const std::size_t n = bytes.size() / kRecord;
  ds.labels.resize(n);
  ds.images.resize(n * 3 * 32 * 32);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kRecord;
    ds.labels[i] = rec[0];
    for (std::size_t p = 0; p < 3 * 32 * 32; ++p)
      ds.images[i * 3 * 32 * 32 + p] = static_cast<float>(rec[1 + p]) / 255.0f;
  }
  ds.validate();
  return ds;
}

void write_payload(const fs::path& dir, const LabeledDataset& ds, std::span<const float> deltas,
                   json manifest, std::string* digest_out) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
  const auto images = encode_floats(ds.images);
  const auto labels = encode_labels(ds.labels);
  const auto dbytes = encode_floats(deltas);
  const std::string digest = digest_of(images, labels, dbytes);
  manifest["digest_algo"] = "sha256";
  manifest["payload_digest"] = digest;
  io::write_file(dir / "images.bin", images);
  io::write_file(dir / "labels.bin", labels);
  io::write_file(dir / "deltas.bin", dbytes);
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  if (digest_out) *digest_out = digest;
}

}  // namespace

std::string payload_digest(const LabeledDataset& ds, std::span<const float> deltas) {
  return digest_of(encode_floats(ds.images), encode_labels(ds.labels), encode_floats(deltas));
}

LabeledDataset load_dataset(const std::string& source) {
  if (source.rfind("shapes:", 0) == 0) return make_synthetic(parse_synthetic_spec(source));
  const fs::path p(source);
  if (fs::is_directory(p)) return read_dir(p).ds;
  if (!fs::exists(p)) throw Error(Errc::kMissingFile, "missing file: " + source);
  return load_cifar_binary(p);
}

std::string save_dataset(const LabeledDataset& ds, const fs::path& dir) {
  ds.validate();
  json m;
  m["format_version"] = 1;
  m["name"] = ds.name;
  m["n"] = ds.size();
  m["k"] = ds.num_classes;
  m["shape"] = {ds.shape.c, ds.shape.h, ds.shape.w};
  m["gamma"] = 0.0;
  m["epsilon"] = 0.0;
  m["seed"] = 0;
  m["target_class"] = -1;
  m["modified_indices"] = json::array();
  std::string digest;
  write_payload(dir, ds, {}, std::move(m), &digest);
  return digest;
}

std::string save_protected(const ProtectedDataset& pd, const fs::path& dir) {
  pd.released.validate();
  json m;
  m["format_version"] = 1;
  m["name"] = pd.released.name;
  m["n"] = pd.released.size();
  m["k"] = pd.released.num_classes;
  m["shape"] = {pd.released.shape.c, pd.released.shape.h, pd.released.shape.w};
  m["gamma"] = pd.split.gamma;
  m["epsilon"] = pd.epsilon;
  m["seed"] = pd.seed;
  m["target_class"] = pd.split.target_class;
  m["modified_indices"] = pd.split.selected_indices;
  std::string digest;
  write_payload(dir, pd.released, pd.deltas, std::move(m), &digest);
  return digest;
}

ProtectedDataset load_protected(const fs::path& dir) {
  RawDir raw = read_dir(dir);
  const json& m = raw.manifest;
  ProtectedDataset pd;
  try {
    if (m.at("digest_algo").get<std::string>() != "sha256")
      throw Error(Errc::kManifestInconsistent, "unsupported digest_algo");
    const std::string digest = digest_of(raw.image_bytes, raw.label_bytes, raw.delta_bytes);
    if (digest != m.at("payload_digest").get<std::string>())
      throw Error(Errc::kManifestInconsistent,
                  "manifest inconsistent with payload: digest mismatch");

    pd.split.selected_indices = m.at("modified_indices").get<std::vector<std::size_t>>();
    pd.split.gamma = m.at("gamma").get<double>();
    pd.split.target_class = m.at("target_class").get<int>();
    pd.epsilon = m.at("epsilon").get<float>();
    pd.seed = m.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::kManifestInconsistent, std::string("manifest field error: ") + e.what());
  }

  const std::size_t n = raw.ds.size();
  auto& sel = pd.split.selected_indices;
  if (!std::is_sorted(sel.begin(), sel.end()) ||
      std::adjacent_find(sel.begin(), sel.end()) != sel.end() ||
      (!sel.empty() && sel.back() >= n))
    throw Error(Errc::kManifestInconsistent,
                "manifest inconsistent with payload: modified_indices");
  // gamma must agree with the payload up to one sample of rounding.
  const double implied = static_cast<double>(sel.size());
  if (std::abs(pd.split.gamma * static_cast<double>(n) - implied) > 1.0)
    throw Error(Errc::kManifestInconsistent,
                "manifest inconsistent with payload: gamma does not match modified count");

  const std::size_t d = raw.ds.shape.size();
  if (raw.delta_bytes.size() != sel.size() * d * 4)
    throw Error(Errc::kManifestInconsistent,
                "manifest inconsistent with payload: deltas.bin size");
  pd.deltas.resize(sel.size() * d);
  io::ByteReader(raw.delta_bytes).f32(pd.deltas);
  for (float v : pd.deltas)
    if (!(std::abs(v) <= pd.epsilon))
      throw Error(Errc::kManifestInconsistent,
                  "manifest inconsistent with payload: delta exceeds epsilon");

  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (next < sel.size() && sel[next] == i) {
      ++next;
    } else {
      pd.split.remaining_indices.push_back(i);
    }
  }
  pd.released = std::move(raw.ds);
  return pd;
}

// ---------------------------------------------------------------------------
// Watermark subset selection and assembly

std::size_t watermark_budget(std::size_t n, double gamma) {
  return static_cast<std::size_t>(std::llround(gamma * static_cast<double>(n)));
}

std::vector<double> per_sample_grad_norms(const ClassifierModel& model,
                                          const LabeledDataset& ds,
                                          std::span<const std::size_t> indices) {
  std::vector<double> norms(indices.size());
  std::vector<float> grad(model.param_count());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t idx[1] = {indices[r]};
    Mat x = ds.batch(idx);
    const int y[1] = {ds.labels[indices[r]]};
    ForwardTape tape;
    Mat logits = model.forward(x, &tape);
    Mat dlogits;
    softmax_cross_entropy(logits, y, &dlogits);
    std::fill(grad.begin(), grad.end(), 0.0f);
    model.backward(tape, &dlogits, nullptr, grad.data(), nullptr);
    double s = 0.0;
    for (float g : grad) s += static_cast<double>(g) * g;
    norms[r] = std::sqrt(s);
  }
  return norms;
}

std::vector<std::size_t> top_by_norm(std::span<const std::size_t> candidates,
                                     std::span<const double> norms, std::size_t budget) {
  if (candidates.size() != norms.size())
    throw Error(Errc::kShapeMismatch, "candidates and norms differ in length");
  if (budget > candidates.size())
    throw Error(Errc::kInsufficientClassPopulation, "insufficient class population");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (norms[a] != norms[b]) return norms[a] > norms[b];
    return candidates[a] < candidates[b];
  });
  std::vector<std::size_t> out;
  out.reserve(budget);
  for (std::size_t r = 0; r < budget; ++r) out.push_back(candidates[order[r]]);
  std::sort(out.begin(), out.end());
  return out;
}

DatasetSplit select_watermark_subset(const LabeledDataset& ds, double gamma,
                                     const ClassifierModel& model, int target_class) {
  if (target_class < 0 || target_class >= ds.num_classes)
    throw Error(Errc::kInvalidArgument, "target_class out of range");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw Error(Errc::kInvalidArgument, "gamma must lie in (0, 1]");
  const std::size_t budget = watermark_budget(ds.size(), gamma);
  if (budget < 1) throw Error(Errc::kInvalidArgument, "gamma * N rounds to zero samples");
  const auto candidates = ds.class_indices(target_class);
  if (candidates.size() < budget)
    throw Error(Errc::kInsufficientClassPopulation,
                "insufficient class population: class " + std::to_string(target_class) +
                    " has " + std::to_string(candidates.size()) + " samples, need " +
                    std::to_string(budget));
  const auto norms = per_sample_grad_norms(model, ds, candidates);

  DatasetSplit split;
  split.gamma = gamma;
  split.target_class = target_class;
  split.selected_indices = top_by_norm(candidates, norms, budget);
  std::size_t next = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (next < split.selected_indices.size() && split.selected_indices[next] == i) {
      ++next;
    } else {
      split.remaining_indices.push_back(i);
    }
  }
  return split;
}

ProtectedDataset assemble_protected(const LabeledDataset& ds, const DatasetSplit& split,
                                    std::span<const float> deltas, float epsilon,
                                    std::uint64_t seed) {
  const auto d = static_cast<std::size_t>(ds.shape.size());
  if (deltas.size() != split.selected_indices.size() * d)
    throw Error(Errc::kShapeMismatch, "delta payload does not match selected samples");
  if (!(epsilon >= 0.0f)) throw Error(Errc::kInvalidArgument, "epsilon must be >= 0");

  ProtectedDataset pd;
  pd.released = ds;
  pd.split = split;
  pd.epsilon = epsilon;
  pd.seed = seed;
  pd.deltas.resize(deltas.size());
  for (std::size_t j = 0; j < split.selected_indices.size(); ++j) {
    auto img = pd.released.image(split.selected_indices[j]);
    for (std::size_t p = 0; p < d; ++p) {
      const float base = img[p];
      const float proj = std::clamp(deltas[j * d + p], -epsilon, epsilon);
      const float mod = std::clamp(base + proj, 0.0f, 1.0f);
      img[p] = mod;
      pd.deltas[j * d + p] = std::clamp(mod - base, -epsilon, epsilon);
    }
  }
  return pd;
}

// ---------------------------------------------------------------------------
// Patch-trigger reference watermark

PatchTrigger corner_patch(const ImageShape& shape, int side, int target_label) {
  PatchTrigger t;
  t.target_label = target_label;
  t.mask.assign(shape.size(), 1.0f);
  t.pattern.assign(shape.size(), 0.0f);
  for (int c = 0; c < shape.c; ++c)
    for (int y = shape.h - side; y < shape.h; ++y)
      for (int x = shape.w - side; x < shape.w; ++x) {
        const int p = (c * shape.h + y) * shape.w + x;
        t.mask[p] = 0.0f;
        t.pattern[p] = ((x + y) % 2 == 0) ? 1.0f : 0.0f;
      }
  return t;
}

void stamp_trigger(const PatchTrigger& trig, std::span<const float> x, std::span<float> out) {
  for (std::size_t p = 0; p < x.size(); ++p)
    out[p] = (1.0f - trig.mask[p]) * trig.pattern[p] + trig.mask[p] * x[p];
}

LabeledDataset apply_patch_trigger(const LabeledDataset& ds, const PatchTrigger& trig,
                                   double rate, std::uint64_t seed,
                                   std::vector<std::size_t>* poisoned) {
  const auto d = static_cast<std::size_t>(ds.shape.size());
  if (trig.mask.size() != d || trig.pattern.size() != d)
    throw Error(Errc::kShapeMismatch, "trigger shape does not match images");
  for (float m : trig.mask)
    if (m != 0.0f && m != 1.0f) throw Error(Errc::kInvalidArgument, "invalid mask values");
  for (float t : trig.pattern)
    if (!(t >= 0.0f && t <= 1.0f)) throw Error(Errc::kPixelOutOfRange, "pattern outside [0,1]");
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error(Errc::kInvalidArgument, "rate must lie in [0,1]");

  LabeledDataset out = ds;
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t count = watermark_budget(ds.size(), rate);
  order.resize(count);
  std::sort(order.begin(), order.end());
  for (std::size_t i : order) {
    std::vector<float> tmp(d);
    stamp_trigger(trig, ds.image(i), tmp);
    std::copy(tmp.begin(), tmp.end(), out.image(i).begin());
    out.labels[i] = trig.target_label;
  }
  if (poisoned) *poisoned = std::move(order);
  return out;
}

}  // namespace dwv
