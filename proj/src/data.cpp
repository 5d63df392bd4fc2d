#include "dctkd/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dctkd/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "TNSRBOX1 writer assumes a little-endian host");

namespace dctkd {

void validate(const DatasetSpec& spec) {
  if (spec.class_count < 2) throw ConfigError("dataset needs at least 2 classes");
  if (spec.concepts_per_image < 1) throw ConfigError("concepts_per_image must be >= 1");
  if (spec.concept_pool < spec.concepts_per_image)
    throw ConfigError("concept pool smaller than concepts_per_image");
  if (spec.image_h < 8 || spec.image_w < 8 || spec.image_h % 4 != 0 || spec.image_w % 4 != 0)
    throw ConfigError("image size must be >= 8 and divisible by 4");
  if (spec.channels < 1) throw ConfigError("channels must be >= 1");
  if (spec.train_count < 1 || spec.val_count < 1)
    throw ConfigError("train and val counts must be >= 1");
  if (spec.background_noise < 0.0 || spec.background_noise > 1.0 ||
      spec.concept_jitter < 0.0 || spec.concept_jitter > 0.5)
    throw ConfigError("background_noise in [0,1] and concept_jitter in [0,0.5] required");
}

namespace {

int64_t comb(int n, int k) {
  int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// First `count` size-m combinations of {0..pool-1} in lexicographic order.
std::vector<std::vector<int>> lexicographic_combinations(int pool, int m, int count) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) cur[static_cast<size_t>(i)] = i;
  while (static_cast<int>(out.size()) < count) {
    out.push_back(cur);
    int i = m - 1;
    while (i >= 0 && cur[static_cast<size_t>(i)] == pool - m + i) --i;
    if (i < 0) break;
    ++cur[static_cast<size_t>(i)];
    for (int j = i + 1; j < m; ++j) cur[static_cast<size_t>(j)] = cur[static_cast<size_t>(j - 1)] + 1;
  }
  return out;
}

// Deterministic textured prototype for one concept id: gratings, checkers,
// blobs and rings with a per-concept channel tint.
Tensor render_prototype(int concept_id, int pool, int channels, int ph, int pw) {
  Tensor proto(Shape{channels, ph, pw});
  const double pi = std::acos(-1.0);
  const double theta = pi * concept_id / pool;
  const double cx = (pw - 1) / 2.0, cy = (ph - 1) / 2.0;
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      double v = 0.0;
      switch (concept_id % 4) {
        case 0: {  // oriented grating
          const double t = (x * std::cos(theta) + y * std::sin(theta)) / pw;
          v = 0.5 + 0.5 * std::sin(2.0 * pi * (2.0 + concept_id / 4) * t);
          break;
        }
        case 1: {  // checkerboard
          const int cell = 2 + (concept_id / 4) % 2;
          v = ((x / cell + y / cell) % 2 == 0) ? 1.0 : 0.1;
          break;
        }
        case 2: {  // two diagonal blobs
          const double s = pw / 5.0;
          const double d1 = (std::pow(x - 0.3 * pw, 2) + std::pow(y - 0.3 * ph, 2)) / (s * s);
          const double d2 = (std::pow(x - 0.7 * pw, 2) + std::pow(y - 0.7 * ph, 2)) / (s * s);
          v = std::exp(-d1) + std::exp(-d2);
          break;
        }
        default: {  // concentric rings
          const double r = std::sqrt(std::pow(x - cx, 2) + std::pow(y - cy, 2));
          v = 0.5 + 0.5 * std::cos(2.0 * pi * r / (2.0 + (concept_id / 4) % 3));
          break;
        }
      }
      v = std::clamp(v, 0.0, 1.0);
      for (int c = 0; c < channels; ++c) {
        // tint: each concept excites a different channel mix
        const double tint = 0.35 + 0.65 * (((concept_id >> (c % 3)) & 1) ? 1.0 : 0.25);
        proto(c, y, x) = std::clamp(v * tint, 0.0, 1.0);
      }
    }
  }
  return proto;
}

struct PlacementBox {
  int y0, x0;
};

bool overlaps(const PlacementBox& a, const PlacementBox& b, int ph, int pw) {
  return !(a.y0 + ph <= b.y0 || b.y0 + ph <= a.y0 || a.x0 + pw <= b.x0 || b.x0 + pw <= a.x0);
}

SceneSample make_sample(const DatasetSpec& spec, const std::vector<Tensor>& prototypes,
                        const std::vector<int>& concepts, int label, std::mt19937_64& rng) {
  SceneSample sample;
  sample.label = label;
  sample.image = Tensor(Shape{spec.channels, spec.image_h, spec.image_w});
  for (auto& v : sample.image.values) v = spec.background_noise * uniform01(rng);

  const int ph = spec.image_h / 4, pw = spec.image_w / 4;
  const int m = static_cast<int>(concepts.size());
  std::vector<PlacementBox> boxes;

  if (m <= 4) {
    // one quadrant per concept keeps boxes disjoint and spread out
    std::vector<int> quadrants{0, 1, 2, 3};
    shuffle_indices(quadrants, rng);
    const int qh = spec.image_h / 2, qw = spec.image_w / 2;
    for (int i = 0; i < m; ++i) {
      const int q = quadrants[static_cast<size_t>(i)];
      const int base_y = (q / 2) * qh, base_x = (q % 2) * qw;
      boxes.push_back({base_y + uniform_int(rng, qh - ph + 1),
                       base_x + uniform_int(rng, qw - pw + 1)});
    }
  } else {
    // rejection placement with bounded retries
    for (int i = 0; i < m; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        PlacementBox cand{uniform_int(rng, spec.image_h - ph + 1),
                          uniform_int(rng, spec.image_w - pw + 1)};
        placed = std::none_of(boxes.begin(), boxes.end(), [&](const PlacementBox& b) {
          return overlaps(cand, b, ph, pw);
        });
        if (placed) boxes.push_back(cand);
      }
      if (!placed)
        throw GenerationError("could not place concept " + std::to_string(i) +
                              " without overlap after 200 attempts");
    }
  }

  for (int i = 0; i < m; ++i) {
    const int cid = concepts[static_cast<size_t>(i)];
    const Tensor& proto = prototypes[static_cast<size_t>(cid)];
    const double brightness = 1.0 - spec.concept_jitter * uniform01(rng);
    const auto& box = boxes[static_cast<size_t>(i)];
    for (int c = 0; c < spec.channels; ++c)
      for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
          sample.image(c, box.y0 + y, box.x0 + x) = brightness * proto(c, y, x);
    sample.concept_layout.push_back({cid, box.y0, box.x0, ph, pw});
  }
  return sample;
}

}  // namespace

SceneDataset generate_scene_dataset(const DatasetSpec& spec) {
  validate(spec);
  if (comb(spec.concept_pool, spec.concepts_per_image) < spec.class_count)
    throw GenerationError("concept pool admits fewer concept sets than classes");

  SceneDataset ds;
  ds.class_concepts = lexicographic_combinations(spec.concept_pool, spec.concepts_per_image,
                                                 spec.class_count);
  const int ph = spec.image_h / 4, pw = spec.image_w / 4;
  for (int c = 0; c < spec.concept_pool; ++c)
    ds.prototypes.push_back(render_prototype(c, spec.concept_pool, spec.channels, ph, pw));

  std::mt19937_64 rng(spec.seed);
  auto fill = [&](std::vector<SceneSample>& out, int count) {
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
      const int label = i % spec.class_count;  // balanced by construction
      out.push_back(make_sample(spec, ds.prototypes,
                                ds.class_concepts[static_cast<size_t>(label)], label, rng));
    }
  };
  fill(ds.train, spec.train_count);
  fill(ds.val, spec.val_count);
  return ds;
}

// --- IDX -----------------------------------------------------------------------

namespace {

uint32_t read_be32(const unsigned char* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void write_be32(std::ofstream& os, uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Tensor load_idx_impl(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 4)
    throw FormatError(path + ": truncated IDX header (file is " +
                      std::to_string(bytes.size()) + " bytes, need 4)");
  if (bytes[0] != 0 || bytes[1] != 0)
    throw FormatError(path + ": bad IDX magic at byte 0");
  if (bytes[2] != 0x08) throw FormatError(path + ": unsupported IDX dtype at byte 2");
  const int ndims = bytes[3];
  if (ndims < 1 || ndims > 4) throw FormatError(path + ": bad dimension count at byte 3");
  const size_t header = 4 + 4 * static_cast<size_t>(ndims);
  if (bytes.size() < header)
    throw FormatError(path + ": truncated IDX extents at byte " + std::to_string(bytes.size()));
  std::vector<int> dims;
  int64_t count = 1;
  for (int d = 0; d < ndims; ++d) {
    const uint32_t e = read_be32(bytes.data() + 4 + 4 * d);
    dims.push_back(static_cast<int>(e));
    count *= e;
  }
  if (static_cast<int64_t>(bytes.size()) - static_cast<int64_t>(header) != count)
    throw FormatError(path + ": payload length " + std::to_string(bytes.size() - header) +
                      " does not match extents product " + std::to_string(count) +
                      " at byte " + std::to_string(header));
  Tensor out(Shape{dims});
  for (int64_t i = 0; i < count; ++i)
    out.values[static_cast<size_t>(i)] = bytes[header + static_cast<size_t>(i)] / 255.0;
  return out;
}

}  // namespace

Tensor load_idx(const std::string& path) { return load_idx_impl(path); }

std::vector<int> load_idx_labels(const std::string& path) {
  const Tensor t = load_idx_impl(path);
  if (t.shape.rank() != 1) throw FormatError(path + ": label file must be 1-dimensional");
  std::vector<int> labels;
  labels.reserve(t.values.size());
  for (double v : t.values) labels.push_back(static_cast<int>(std::lround(v * 255.0)));
  return labels;
}

void save_idx(const std::string& path, const Tensor& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  const unsigned char magic[4] = {0, 0, 0x08,
                                  static_cast<unsigned char>(data.shape.rank())};
  os.write(reinterpret_cast<const char*>(magic), 4);
  for (int d = 0; d < data.shape.rank(); ++d)
    write_be32(os, static_cast<uint32_t>(data.shape[d]));
  for (double v : data.values) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    const unsigned char b = static_cast<unsigned char>(std::lround(clamped * 255.0));
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
}

void save_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  const unsigned char magic[4] = {0, 0, 0x08, 1};
  os.write(reinterpret_cast<const char*>(magic), 4);
  write_be32(os, static_cast<uint32_t>(labels.size()));
  for (int v : labels) {
    const unsigned char b = static_cast<unsigned char>(v);
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
}

// --- TNSRBOX1 --------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'T', 'N', 'S', 'R', 'B', 'O', 'X', '1'};
}

void save_tensor_file(const std::string& path,
                      const std::vector<std::pair<std::string, Tensor>>& tensors,
                      const nlohmann::json& meta) {
  for (size_t i = 0; i < tensors.size(); ++i)
    for (size_t j = i + 1; j < tensors.size(); ++j)
      if (tensors[i].first == tensors[j].first)
        throw FormatError("duplicate tensor name: " + tensors[i].first);

  nlohmann::json index = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    index.push_back({{"name", name},
                     {"shape", t.shape.dims},
                     {"dtype", "f8"},
                     {"offset", offset},
                     {"nbytes", t.numel() * 8}});
    offset += t.numel() * 8;
  }

  nlohmann::json header = {{"meta", meta}, {"tensors", index}};
  const std::string header_str = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(kMagic, 8);
  const uint32_t len = static_cast<uint32_t>(header_str.size());
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, t] : tensors)
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.numel() * 8));
}

TensorFile load_tensor_file(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw FormatError(path + ": bad TNSRBOX1 magic");
  uint32_t header_len;
  std::memcpy(&header_len, bytes.data() + 8, 4);
  if (bytes.size() < 12 + static_cast<size_t>(header_len))
    throw FormatError(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": header is not valid JSON: " + e.what());
  }

  TensorFile out;
  out.meta = header.value("meta", nlohmann::json::object());
  const size_t payload_base = 12 + header_len;
  const int64_t payload_size = static_cast<int64_t>(bytes.size() - payload_base);
  int64_t expected_next = 0;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name");
    const std::vector<int> dims = entry.at("shape").get<std::vector<int>>();
    const int64_t offset = entry.at("offset");
    const int64_t nbytes = entry.at("nbytes");
    if (entry.at("dtype") != "f8")
      throw FormatError(path + ": unsupported dtype for " + name);
    Shape shape = dims.empty() ? Shape{} : Shape(dims);
    if (shape.numel() * 8 != nbytes)
      throw FormatError(path + ": nbytes does not match shape for " + name);
    if (offset < expected_next)
      throw FormatError(path + ": overlapping payload for " + name);
    if (offset + nbytes > payload_size)
      throw FormatError(path + ": payload for " + name + " extends past end of file");
    expected_next = offset + nbytes;
    for (const auto& [seen, unused] : out.tensors) {
      (void)unused;
      if (seen == name) throw FormatError(path + ": duplicate tensor name " + name);
    }
    Tensor t(shape);
    std::memcpy(t.values.data(), bytes.data() + payload_base + offset,
                static_cast<size_t>(nbytes));
    out.tensors.emplace_back(name, std::move(t));
  }
  return out;
}

// --- batching --------------------------------------------------------------------

BatchIterator::BatchIterator(const std::vector<SceneSample>& samples, int batch_size,
                             uint64_t seed, bool shuffle)
    : samples_(&samples), batch_size_(batch_size), shuffle_(shuffle), rng_(seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

std::vector<std::vector<int>> BatchIterator::epoch_indices() {
  std::vector<int> order(samples_->size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  if (shuffle_) shuffle_indices(order, rng_);
  std::vector<std::vector<int>> batches;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size_))
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(start + static_cast<size_t>(batch_size_),
                                                      order.size())));
  return batches;
}

Batch BatchIterator::assemble(const std::vector<int>& indices) const {
  if (indices.empty()) throw ContractError("cannot assemble an empty batch");
  const auto& first = (*samples_)[static_cast<size_t>(indices[0])].image;
  const int c = first.shape[0], h = first.shape[1], w = first.shape[2];
  Batch batch;
  batch.indices = indices;
  batch.images = Tensor(Shape{static_cast<int>(indices.size()), c, h, w});
  const int64_t stride = first.numel();
  for (size_t i = 0; i < indices.size(); ++i) {
    const auto& s = (*samples_)[static_cast<size_t>(indices[i])];
    std::copy(s.image.values.begin(), s.image.values.end(),
              batch.images.values.begin() + static_cast<int64_t>(i) * stride);
    batch.labels.push_back(s.label);
  }
  return batch;
}

}  // namespace dctkd
