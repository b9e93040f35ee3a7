#include "dualgan/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "dualgan/rng.hpp"

namespace dualgan {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

// ---------------------------------------------------------------------------
// Manifest

bool Manifest::is_frontal(const FaceRecord& r) const { return std::abs(r.yaw_degrees) <= frontal_threshold_degrees; }

std::filesystem::path Manifest::resolve(const FaceRecord& r) const {
  std::filesystem::path p(r.image_path);
  return p.is_absolute() ? p : root / p;
}

std::vector<int> Manifest::identities() const {
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.identity_id);
  return {ids.begin(), ids.end()};
}

std::map<int, IdentityCounts> Manifest::counts() const {
  std::map<int, IdentityCounts> c;
  for (const auto& r : records) {
    auto& e = c[r.identity_id];
    (is_frontal(r) ? e.frontal : e.profile)++;
  }
  return c;
}

void Manifest::validate() const {
  if (records.empty()) throw ManifestError("manifest: no records");
  for (const auto& [id, c] : counts()) {
    if (c.frontal == 0) throw ManifestError("manifest: identity " + std::to_string(id) + " has no frontal record");
    if (c.profile == 0) throw ManifestError("manifest: identity " + std::to_string(id) + " has no profile record");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path, double frontal_threshold_degrees) {
  std::ifstream f(path);
  if (!f) throw ManifestError("manifest: cannot open " + path.string());
  Manifest m;
  m.frontal_threshold_degrees = frontal_threshold_degrees;
  m.root = path.parent_path();
  std::string line;
  int row = 0;
  bool header_seen = false;
  while (std::getline(f, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      if (cells.size() == 4 && cells[0] == "path" && cells[1] == "identity") continue;
    }
    auto bad = [&](const std::string& why) {
      return ManifestError("manifest " + path.string() + " row " + std::to_string(row) + ": " + why);
    };
    if (cells.size() != 4) throw bad("expected 4 columns, got " + std::to_string(cells.size()));
    FaceRecord r;
    r.image_path = cells[0];
    if (r.image_path.empty()) throw bad("empty path");
    try {
      std::size_t used = 0;
      const long id = std::stol(cells[1], &used);
      if (used != cells[1].size() || id < 0) throw std::invalid_argument("");
      r.identity_id = static_cast<int>(id);
    } catch (const std::exception&) {
      throw bad("identity must be a non-negative integer, got '" + cells[1] + "'");
    }
    try {
      std::size_t used = 0;
      r.yaw_degrees = std::stod(cells[2], &used);
      if (used != cells[2].size() || !std::isfinite(r.yaw_degrees)) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw bad("yaw must be a number, got '" + cells[2] + "'");
    }
    if (std::abs(r.yaw_degrees) > 90.0) throw bad("yaw " + cells[2] + " outside [-90,90]");
    try {
      r.split = parse_split(cells[3]);
    } catch (const std::exception&) {
      throw bad("split must be train or test, got '" + cells[3] + "'");
    }
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ManifestError("manifest: cannot write " + path.string());
  f << "path,identity,yaw,split\n";
  for (const auto& r : manifest.records) {
    std::ostringstream yaw;
    yaw << r.yaw_degrees;
    f << r.image_path << ',' << r.identity_id << ',' << yaw.str() << ',' << to_string(r.split) << '\n';
  }
  if (!f) throw ManifestError("manifest: write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// PNG

Image read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw std::runtime_error("png: cannot read " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = 3;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("png: decode failed for " + path.string() + ": " + img.message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3 && image.channels != 1) throw std::invalid_argument("png: only RGB or gray output");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw std::runtime_error("png: cannot write " + path.string() + ": " + img.message);
  }
}

Tensor normalize(const Image& image) {
  if (image.channels != 3) {
    throw std::invalid_argument("normalize: expected 3 channels, got " + std::to_string(image.channels));
  }
  if (static_cast<std::int64_t>(image.pixels.size()) != std::int64_t{image.width} * image.height * 3) {
    throw std::invalid_argument("normalize: pixel buffer does not match extents");
  }
  Tensor t(Shape{image.height, image.width, 3});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    t[static_cast<std::int64_t>(i)] = static_cast<float>(image.pixels[i] / 127.5 - 1.0);
  }
  return t;
}

Image denormalize(const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 3) {
    throw std::invalid_argument("denormalize: expected [H,W,3], got " + shape_string(t.shape()));
  }
  Image out{static_cast<int>(t.dim(1)), static_cast<int>(t.dim(0)), 3, {}};
  out.pixels.resize(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const double v = std::round((static_cast<double>(t[i]) + 1.0) * 127.5);
    out.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic faces

void SyntheticSpec::validate() const {
  if (num_identities < 2) throw std::invalid_argument("synthetic: need at least 2 identities");
  if (resolution < 8) throw std::invalid_argument("synthetic: resolution too small");
  if (poses_per_identity.empty()) throw std::invalid_argument("synthetic: empty pose list");
  bool frontal = false, profile = false;
  for (double y : poses_per_identity) {
    if (!std::isfinite(y) || std::abs(y) > 90.0) {
      throw std::invalid_argument("synthetic: pose " + std::to_string(y) + " outside [-90,90]");
    }
    (std::abs(y) <= 10.0 ? frontal : profile) = true;
  }
  if (!frontal || !profile) throw std::invalid_argument("synthetic: poses need a frontal and a profile view");
  for (double y : test_poses) {
    if (std::find(poses_per_identity.begin(), poses_per_identity.end(), y) == poses_per_identity.end()) {
      throw std::invalid_argument("synthetic: test pose " + std::to_string(y) + " not in pose list");
    }
  }
}

FaceParams identity_params(std::uint64_t seed, int identity, int attempt) {
  Rng rng(derive_seed(seed, {0xface, static_cast<std::uint64_t>(identity), static_cast<std::uint64_t>(attempt)}));
  FaceParams p{};
  auto color = [&](double* c, double lo, double hi) {
    for (int i = 0; i < 3; ++i) c[i] = rng.uniform(lo, hi);
  };
  color(p.skin, 90, 250);
  color(p.hair, 0, 255);
  color(p.eyes, 0, 255);
  p.mouth[0] = rng.uniform(120, 255);
  p.mouth[1] = rng.uniform(0, 110);
  p.mouth[2] = rng.uniform(0, 140);
  p.half_width = rng.uniform(0.48, 0.72);
  p.half_height = rng.uniform(0.70, 0.90);
  p.eye_angle = rng.uniform(0.30, 0.62);
  p.eye_y = rng.uniform(-0.28, -0.02);
  p.eye_size = rng.uniform(0.09, 0.17);
  p.mouth_angle = rng.uniform(0.18, 0.45);
  p.mouth_y = rng.uniform(0.30, 0.52);
  p.hairline_y = rng.uniform(-0.80, -0.40);
  p.face_angle = rng.uniform(1.05, 1.35);
  return p;
}

namespace {

constexpr double kBackground[3] = {70, 78, 92};

// Colour of one sample point in [-1,1]^2 (y down).
void shade(const FaceParams& f, double yaw, double x, double y, double* rgb) {
  for (int i = 0; i < 3; ++i) rgb[i] = kBackground[i];
  if (std::abs(y) >= f.half_height) return;
  // Head turn: horizontal shear of the silhouette towards the turn direction.
  const double shift = 0.18 * std::sin(yaw) * (0.6 + 0.4 * y);
  const double xs = x - shift;
  const double r = f.half_width * std::sqrt(1.0 - (y / f.half_height) * (y / f.half_height));
  if (std::abs(xs) >= r) return;
  // Visible cylinder angle, then the head-frame angle; anything turned past
  // face_angle is the side/back of the head (occluded face).
  const double phi = std::asin(xs / r);
  const double psi = phi - yaw;
  const double light = 0.72 + 0.28 * std::cos(phi);
  const double* base = f.skin;
  bool hair = std::abs(psi) > f.face_angle || y < f.hairline_y + 0.12 * psi * psi;
  if (hair) base = f.hair;
  double c[3] = {base[0], base[1], base[2]};
  if (!hair) {
    const double arc = f.half_width;  // angle -> face-plane distance
    for (double side : {-1.0, 1.0}) {
      const double dx = (psi - side * f.eye_angle) * arc / f.eye_size;
      const double dy = (y - f.eye_y) / (0.65 * f.eye_size);
      if (dx * dx + dy * dy < 1.0) {
        for (int i = 0; i < 3; ++i) c[i] = f.eyes[i];
      }
    }
    if (std::abs(psi) < f.mouth_angle && std::abs(y - f.mouth_y) < 0.055) {
      for (int i = 0; i < 3; ++i) c[i] = f.mouth[i];
    }
    const double nose_top = f.eye_y + 0.08, nose_bot = f.mouth_y - 0.10;
    if (y > nose_top && y < nose_bot) {
      const double t = (y - nose_top) / (nose_bot - nose_top);
      if (std::abs(psi) < 0.05 + 0.10 * t) {
        for (int i = 0; i < 3; ++i) c[i] = 0.75 * f.skin[i];
      }
    }
  }
  for (int i = 0; i < 3; ++i) rgb[i] = c[i] * light;
}

}  // namespace

Image render_face(const FaceParams& params, double yaw_degrees, int resolution) {
  const double yaw = yaw_degrees * std::numbers::pi / 180.0;
  Image img{resolution, resolution, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(resolution) * resolution * 3)};
  constexpr int ss = 3;  // supersampling per axis
  for (int py = 0; py < resolution; ++py) {
    for (int px = 0; px < resolution; ++px) {
      double acc[3] = {0, 0, 0};
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const double x = ((px + (sx + 0.5) / ss) / resolution) * 2.0 - 1.0;
          const double y = ((py + (sy + 0.5) / ss) / resolution) * 2.0 - 1.0;
          double rgb[3];
          shade(params, yaw, x, y, rgb);
          for (int i = 0; i < 3; ++i) acc[i] += rgb[i];
        }
      }
      for (int i = 0; i < 3; ++i) {
        const double v = std::round(acc[i] / (ss * ss));
        img.pixels[(static_cast<std::size_t>(py) * resolution + px) * 3 + i] =
            static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return img;
}

namespace {

double differing_pixel_fraction(const Image& a, const Image& b) {
  std::size_t diff = 0;
  const std::size_t n = a.pixels.size() / 3;
  for (std::size_t p = 0; p < n; ++p) {
    if (a.pixels[3 * p] != b.pixels[3 * p] || a.pixels[3 * p + 1] != b.pixels[3 * p + 1] ||
        a.pixels[3 * p + 2] != b.pixels[3 * p + 2]) {
      ++diff;
    }
  }
  return static_cast<double>(diff) / static_cast<double>(n);
}

std::string pose_tag(double yaw) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+04d", static_cast<int>(std::lround(yaw)));
  return buf;
}

}  // namespace

Manifest synth_generate(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw std::runtime_error("synthetic: cannot create " + (out_dir / "images").string() + ": " + ec.message());

  // Draw identities, redrawing any whose frontal is too close to an earlier one.
  std::vector<FaceParams> params;
  std::vector<Image> frontals;
  for (int id = 0; id < spec.num_identities; ++id) {
    for (int attempt = 0;; ++attempt) {
      auto p = identity_params(spec.seed, id, attempt);
      auto img = render_face(p, 0.0, spec.resolution);
      bool distinct = true;
      for (const auto& other : frontals) distinct = distinct && differing_pixel_fraction(img, other) >= 0.01;
      if (distinct) {
        params.push_back(p);
        frontals.push_back(std::move(img));
        break;
      }
      if (attempt > 100) throw std::runtime_error("synthetic: could not draw distinct identities");
    }
  }

  Manifest m;
  m.root = out_dir;
  for (int id = 0; id < spec.num_identities; ++id) {
    for (double yaw : spec.poses_per_identity) {
      char name[64];
      std::snprintf(name, sizeof(name), "id%03d_yaw%s.png", id, pose_tag(yaw).c_str());
      const std::string rel = std::string("images/") + name;
      write_png(out_dir / rel, yaw == 0.0 ? frontals[static_cast<std::size_t>(id)]
                                          : render_face(params[static_cast<std::size_t>(id)], yaw, spec.resolution));
      const bool test =
          std::find(spec.test_poses.begin(), spec.test_poses.end(), yaw) != spec.test_poses.end();
      m.records.push_back({rel, id, yaw, test ? Split::test : Split::train});
    }
  }
  write_manifest(out_dir / "manifest.csv", m);
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Pair stream

PairStream::PairStream(const Manifest& manifest, std::uint64_t seed, Split split) : seed_(seed) {
  identity_of_.reserve(manifest.records.size());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    identity_of_.push_back(r.identity_id);
    if (manifest.is_frontal(r)) {
      frontals_[r.identity_id].push_back(i);
    } else if (r.split == split) {
      profiles_.push_back(i);
    }
  }
  if (profiles_.empty()) throw ManifestError("pairs: no profile records in split " + to_string(split));
  for (auto p : profiles_) {
    if (!frontals_.count(identity_of_[p])) {
      throw ManifestError("pairs: identity " + std::to_string(identity_of_[p]) + " has no frontal record");
    }
  }
}

const std::vector<std::size_t>& PairStream::frontals_of(int identity) const { return frontals_.at(identity); }

PairStream::Pair PairStream::pair_at(std::uint64_t index) const {
  const std::uint64_t n = profiles_.size();
  const std::uint64_t epoch = index / n;
  if (epoch != cached_epoch_) {
    order_ = profiles_;
    Rng rng(derive_seed(seed_, {0xe90c, epoch}));
    rng.shuffle(order_);
    cached_epoch_ = epoch;
  }
  Pair p;
  p.profile = order_[static_cast<std::size_t>(index % n)];
  p.identity = identity_of_[p.profile];
  const auto& fr = frontals_.at(p.identity);
  Rng pick(derive_seed(seed_, {0xf207, index}));
  p.frontal = fr[static_cast<std::size_t>(pick.below(fr.size()))];
  return p;
}

// ---------------------------------------------------------------------------

ImageStore::ImageStore(const Manifest& manifest) {
  for (const auto& r : manifest.records) {
    auto t = normalize(read_png(manifest.resolve(r)));
    if (t.dim(0) != t.dim(1)) throw std::runtime_error("image store: non-square image " + r.image_path);
    if (resolution_ == 0) resolution_ = static_cast<int>(t.dim(0));
    if (t.dim(0) != resolution_) throw std::runtime_error("image store: mixed resolutions at " + r.image_path);
    images_.push_back(std::move(t));
  }
}

ImageStore::ImageStore(std::vector<Tensor> images, int resolution) : images_(std::move(images)), resolution_(resolution) {
  for (const auto& t : images_) {
    if (t.shape() != Shape{resolution, resolution, 3}) throw ShapeError("image store: bad image shape");
  }
}

Tensor ImageStore::gather(const std::vector<std::size_t>& records) const {
  std::vector<Tensor> items;
  items.reserve(records.size());
  for (auto r : records) items.push_back(images_.at(r));
  return stack<float>(items);
}

PairBatch make_batch(const PairStream& stream, const ImageStore& store, std::uint64_t first_index, int batch_size) {
  PairBatch b;
  for (int i = 0; i < batch_size; ++i) {
    const auto p = stream.pair_at(first_index + static_cast<std::uint64_t>(i));
    b.profile_records.push_back(p.profile);
    b.frontal_records.push_back(p.frontal);
    b.identity_ids.push_back(p.identity);
  }
  b.profiles = store.gather(b.profile_records);
  b.frontals = store.gather(b.frontal_records);
  return b;
}

}  // namespace dualgan
