#include "auda/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "auda/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace auda {

const char* domain_name(Domain d) {
  return d == Domain::source ? "source" : "target";
}

Domain parse_domain(const std::string& s) {
  if (s == "source") return Domain::source;
  if (s == "target") return Domain::target;
  throw ConfigError("unknown domain '" + s + "'");
}

std::string DatasetManifest::image_path(size_t i) const {
  return (fs::path(root_dir) / images[i].file_name).string();
}

// ---- rendering ---------------------------------------------------------------

namespace {

constexpr uint64_t kGeometryTag = 0x67656f6dull;    // "geom"
constexpr uint64_t kAppearanceTag = 0x636f6c72ull;  // "colr"
constexpr uint64_t kDegradeTag = 0x64656772ull;     // "degr"

struct Rgb {
  double r, g, b;
  double luma() const { return 0.299 * r + 0.587 * g + 0.114 * b; }
};

Rgb random_color(Rng& rng) {
  return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95),
          rng.uniform(0.05, 0.95)};
}

struct SceneObject {
  int class_id;
  double x1, y1, x2, y2;
  bool swapped;  // bar orientation
};

// pixel-center point-in-shape test, coordinates relative to the tight box
bool inside_shape(int class_id, double px, double py, const SceneObject& o) {
  const double w = o.x2 - o.x1, h = o.y2 - o.y1;
  const double cx = (o.x1 + o.x2) / 2, cy = (o.y1 + o.y2) / 2;
  const double nx = (px - cx) / (w / 2);  // [-1, 1] inside the box
  const double ny = (py - cy) / (h / 2);
  if (px < o.x1 || px > o.x2 || py < o.y1 || py > o.y2) return false;
  switch (class_id % 6) {
    case 0:  // disc
      return nx * nx + ny * ny <= 1.0;
    case 1:  // square
      return true;
    case 2:  // triangle, apex up
      return std::fabs(nx) <= (ny + 1.0) / 2.0;
    case 3: {  // ring
      const double rr = nx * nx + ny * ny;
      return rr <= 1.0 && rr >= 0.55 * 0.55;
    }
    case 4:  // bar (thin rectangle; thinness baked into the box itself)
      return true;
    case 5: {  // cross
      return std::fabs(nx) <= 0.30 || std::fabs(ny) <= 0.30;
    }
  }
  return false;
}

void smooth_noise_texture(ImageF32& img, Rng& rng, double amp) {
  // bilinear-interpolated random lattice, one value per 16px cell
  const int cell = 16;
  const int gw = img.width / cell + 2, gh = img.height / cell + 2;
  std::vector<double> lattice(size_t(gw) * gh);
  for (auto& v : lattice) v = rng.uniform(-amp, amp);
  for (int y = 0; y < img.height; ++y) {
    const double fy = double(y) / cell;
    const int iy = int(fy);
    const double ty = fy - iy;
    for (int x = 0; x < img.width; ++x) {
      const double fx = double(x) / cell;
      const int ix = int(fx);
      const double tx = fx - ix;
      const double v00 = lattice[size_t(iy * gw + ix)];
      const double v01 = lattice[size_t(iy * gw + ix + 1)];
      const double v10 = lattice[size_t((iy + 1) * gw + ix)];
      const double v11 = lattice[size_t((iy + 1) * gw + ix + 1)];
      const double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                       ty * ((1 - tx) * v10 + tx * v11);
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = std::clamp(img.at(c, y, x) + float(v), 0.f, 1.f);
      }
    }
  }
}

void box_blur_pass(ImageF32& img) {
  // separable 3-tap binomial [1 2 1]/4, edge-clamped
  ImageF32 tmp = img;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const int xl = std::max(0, x - 1), xr = std::min(img.width - 1, x + 1);
        tmp.at(c, y, x) = 0.25f * img.at(c, y, xl) + 0.5f * img.at(c, y, x) +
                          0.25f * img.at(c, y, xr);
      }
    }
    for (int x = 0; x < img.width; ++x) {
      for (int y = 0; y < img.height; ++y) {
        const int yt = std::max(0, y - 1), yb = std::min(img.height - 1, y + 1);
        img.at(c, y, x) = 0.25f * tmp.at(c, yt, x) + 0.5f * tmp.at(c, y, x) +
                          0.25f * tmp.at(c, yb, x);
      }
    }
  }
}

}  // namespace

ImageF32 render_scene(const SceneSpec& spec, uint64_t seed, int image_index,
                      std::vector<BoxAnnotation>* boxes_out) {
  if (spec.num_classes < 1 || spec.num_classes > 6) {
    throw ConfigError("SceneSpec: num_classes must be in [1,6]");
  }
  if (spec.min_objects < 0 || spec.max_objects < spec.min_objects) {
    throw ConfigError("SceneSpec: bad object count range");
  }
  // geometry is domain-independent; appearance is shared too, so the
  // degradation pipeline is the only source/target difference
  Rng geo(derive_seed(seed, kGeometryTag, uint64_t(image_index)));
  Rng app(derive_seed(seed, kAppearanceTag, uint64_t(image_index)));
  Rng deg(derive_seed(seed, kDegradeTag, uint64_t(image_index)));

  const int H = spec.height, W = spec.width;
  const int n_objects = int(geo.uniform_int(int64_t(spec.min_objects),
                                            int64_t(spec.max_objects)));

  std::vector<SceneObject> objects;
  std::set<std::pair<int, int64_t>> used_cells;  // (class, grid cell), R=4
  for (int i = 0; i < n_objects; ++i) {
    SceneObject o{};
    o.class_id = int(geo.uniform_int(uint64_t(spec.num_classes)));
    for (int attempt = 0; attempt < 20; ++attempt) {
      double w = geo.uniform(spec.min_size, spec.max_size);
      double h = geo.uniform(spec.min_size, spec.max_size);
      switch (o.class_id % 6) {
        case 1:  // square
          h = w;
          break;
        case 4:  // bar: thin side is 30% of the long side
          o.swapped = geo.bernoulli(0.5);
          h = std::max(4.0, 0.3 * w);
          if (o.swapped) std::swap(w, h);
          break;
        default:
          break;
      }
      const double margin = 2.0;
      const double cx = geo.uniform(margin + w / 2, W - margin - w / 2);
      const double cy = geo.uniform(margin + h / 2, H - margin - h / 2);
      o.x1 = cx - w / 2;
      o.y1 = cy - h / 2;
      o.x2 = cx + w / 2;
      o.y2 = cy + h / 2;
      // keep center cells distinct per class so encode/decode can separate
      // the objects; accept the last attempt regardless
      const int64_t cell = int64_t(std::floor(cy / 4)) * 1024 +
                           int64_t(std::floor(cx / 4));
      if (used_cells.insert({o.class_id, cell}).second ||
          attempt == 19) {
        break;
      }
    }
    objects.push_back(o);
  }

  // background
  ImageF32 img;
  img.width = W;
  img.height = H;
  img.planes.assign(size_t(3) * H * W, 0.f);
  const double bg_base = app.uniform(0.12, 0.35);
  Rgb bg{bg_base + app.uniform(-0.03, 0.03), bg_base + app.uniform(-0.03, 0.03),
         bg_base + app.uniform(-0.03, 0.03)};
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      img.at(0, y, x) = float(bg.r);
      img.at(1, y, x) = float(bg.g);
      img.at(2, y, x) = float(bg.b);
    }
  }

  // objects, front to back in draw order
  for (const SceneObject& o : objects) {
    Rgb color = random_color(app);
    for (int tries = 0; tries < 16 && std::fabs(color.luma() - bg.luma()) < 0.25;
         ++tries) {
      color = random_color(app);
    }
    const int px1 = std::max(0, int(std::floor(o.x1)));
    const int py1 = std::max(0, int(std::floor(o.y1)));
    const int px2 = std::min(W - 1, int(std::ceil(o.x2)));
    const int py2 = std::min(H - 1, int(std::ceil(o.y2)));
    for (int y = py1; y <= py2; ++y) {
      for (int x = px1; x <= px2; ++x) {
        if (inside_shape(o.class_id, x + 0.5, y + 0.5, o)) {
          img.at(0, y, x) = float(color.r);
          img.at(1, y, x) = float(color.g);
          img.at(2, y, x) = float(color.b);
        }
      }
    }
  }

  if (spec.style == Domain::target) {
    smooth_noise_texture(img, deg, spec.texture_amp);
    const double shift = deg.uniform(-spec.intensity_shift, spec.intensity_shift);
    for (auto& v : img.planes) v = std::clamp(v + float(shift), 0.f, 1.f);
    for (int i = 0; i < spec.blur_passes; ++i) box_blur_pass(img);
    const double sigma = deg.uniform(spec.noise_sigma_lo, spec.noise_sigma_hi);
    for (auto& v : img.planes) {
      v = std::clamp(v + float(deg.normal(0.0, sigma)), 0.f, 1.f);
    }
  }

  if (boxes_out) {
    boxes_out->clear();
    for (const SceneObject& o : objects) {
      boxes_out->push_back({o.x1, o.y1, o.x2, o.y2, o.class_id});
    }
  }
  return img;
}

// ---- dataset generation / COCO ------------------------------------------------

namespace {

const char* kClassNames[6] = {"disc", "square", "triangle",
                              "ring", "bar",    "cross"};

}  // namespace

DatasetManifest generate_dataset(const SceneSpec& spec, int count,
                                 uint64_t seed, const std::string& out_dir,
                                 bool labeled, const std::string& split) {
  if (count < 0) throw ConfigError("generate_dataset: count must be >= 0");
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) {
    throw IoError("cannot create " + out_dir + "/images: " + ec.message());
  }

  DatasetManifest m;
  m.split = split;
  m.domain = spec.style;
  m.labeled = labeled;
  m.num_classes = spec.num_classes;
  m.root_dir = out_dir;

  char name[64];
  for (int i = 0; i < count; ++i) {
    std::vector<BoxAnnotation> boxes;
    ImageF32 img = render_scene(spec, seed, i, &boxes);
    std::snprintf(name, sizeof name, "images/img_%05d.png", i);
    write_png((fs::path(out_dir) / name).string(), quantize(img));
    ImageRecord rec;
    rec.id = i + 1;
    rec.file_name = name;
    rec.width = spec.width;
    rec.height = spec.height;
    if (labeled) rec.boxes = std::move(boxes);
    m.images.push_back(std::move(rec));
  }
  save_coco(m);
  return m;
}

void save_coco(const DatasetManifest& m) {
  json root;
  root["domain"] = domain_name(m.domain);
  root["split"] = m.split;
  json images = json::array();
  for (const ImageRecord& r : m.images) {
    images.push_back({{"id", r.id},
                      {"file_name", r.file_name},
                      {"width", r.width},
                      {"height", r.height}});
  }
  root["images"] = std::move(images);
  json anns = json::array();
  int ann_id = 1;
  for (const ImageRecord& r : m.images) {
    for (const BoxAnnotation& b : r.boxes) {
      anns.push_back({{"id", ann_id++},
                      {"image_id", r.id},
                      {"category_id", b.class_id + 1},
                      {"bbox", {b.x1, b.y1, b.width(), b.height()}},
                      {"area", b.area()},
                      {"iscrowd", 0}});
    }
  }
  root["annotations"] = std::move(anns);
  json cats = json::array();
  for (int c = 0; c < m.num_classes; ++c) {
    cats.push_back({{"id", c + 1}, {"name", kClassNames[c % 6]}});
  }
  root["categories"] = std::move(cats);

  const std::string path = (fs::path(m.root_dir) / "annotations.json").string();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << root.dump(1, '\t') << "\n";
}

DatasetManifest load_coco(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ParseError(manifest_path + ": invalid JSON: " + e.what());
  }
  for (const char* key : {"images", "annotations", "categories"}) {
    if (!root.contains(key)) {
      throw ParseError(manifest_path + ": missing key '" + key + "'");
    }
  }

  DatasetManifest m;
  m.root_dir = fs::path(manifest_path).parent_path().string();
  if (m.root_dir.empty()) m.root_dir = ".";
  m.split = root.value("split", "");
  m.domain = root.contains("domain") ? parse_domain(root["domain"])
                                     : Domain::source;

  // dense remap of category ids, ascending
  std::vector<int> cat_ids;
  for (const auto& c : root["categories"]) {
    if (!c.contains("id")) throw ParseError("category without id");
    cat_ids.push_back(c["id"].get<int>());
  }
  std::sort(cat_ids.begin(), cat_ids.end());
  cat_ids.erase(std::unique(cat_ids.begin(), cat_ids.end()), cat_ids.end());
  auto dense_cat = [&](int id) {
    auto it = std::lower_bound(cat_ids.begin(), cat_ids.end(), id);
    if (it == cat_ids.end() || *it != id) {
      throw ParseError("annotation references unknown category id " +
                       std::to_string(id));
    }
    return int(it - cat_ids.begin());
  };
  m.num_classes = int(cat_ids.size());

  std::unordered_map<int, size_t> index_by_id;
  size_t img_idx = 0;
  for (const auto& jimg : root["images"]) {
    for (const char* key : {"id", "file_name", "width", "height"}) {
      if (!jimg.contains(key)) {
        throw ParseError("image record " + std::to_string(img_idx) +
                         ": missing key '" + key + "'");
      }
    }
    ImageRecord rec;
    rec.id = jimg["id"].get<int>();
    rec.file_name = jimg["file_name"].get<std::string>();
    rec.width = jimg["width"].get<int>();
    rec.height = jimg["height"].get<int>();
    if (!index_by_id.emplace(rec.id, m.images.size()).second) {
      throw ParseError("duplicate image id " + std::to_string(rec.id));
    }
    m.images.push_back(std::move(rec));
    ++img_idx;
  }

  size_t ann_idx = 0;
  for (const auto& jann : root["annotations"]) {
    for (const char* key : {"image_id", "category_id", "bbox"}) {
      if (!jann.contains(key)) {
        throw ParseError("annotation " + std::to_string(ann_idx) +
                         ": missing key '" + key + "'");
      }
    }
    const auto& bbox = jann["bbox"];
    if (!bbox.is_array() || bbox.size() != 4) {
      throw ParseError("annotation " + std::to_string(ann_idx) +
                       ": bbox must be [x, y, width, height]");
    }
    const double x = bbox[0].get<double>(), y = bbox[1].get<double>();
    const double w = bbox[2].get<double>(), h = bbox[3].get<double>();
    if (w <= 0 || h <= 0) {
      throw ParseError("annotation " + std::to_string(ann_idx) +
                       ": bbox width/height must be positive, got " +
                       std::to_string(w) + "x" + std::to_string(h));
    }
    const int image_id = jann["image_id"].get<int>();
    auto it = index_by_id.find(image_id);
    if (it == index_by_id.end()) {
      throw ParseError("annotation " + std::to_string(ann_idx) +
                       ": unknown image id " + std::to_string(image_id));
    }
    BoxAnnotation box{x, y, x + w, y + h,
                      dense_cat(jann["category_id"].get<int>())};
    m.images[it->second].boxes.push_back(box);
    ++ann_idx;
  }
  m.labeled = ann_idx > 0;
  return m;
}

// ---- augmentation ---------------------------------------------------------

BoxAnnotation flip_box_h(const BoxAnnotation& b, int image_width) {
  return {double(image_width) - b.x2, b.y1, double(image_width) - b.x1, b.y2,
          b.class_id};
}

BoxAnnotation rot90_box(const BoxAnnotation& b, int /*image_width*/,
                        int image_height) {
  // 90 degrees clockwise: (x, y) -> (H - y, x)
  return {double(image_height) - b.y2, b.x1, double(image_height) - b.y1, b.x2,
          b.class_id};
}

namespace {

void flip_image_h(ImageF32& img) {
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width / 2; ++x) {
        std::swap(img.at(c, y, x), img.at(c, y, img.width - 1 - x));
      }
    }
  }
}

void rot90_image(ImageF32& img) {
  // clockwise; output (y, x) pulls from input (H-1-x, y)
  ImageF32 out;
  out.width = img.height;
  out.height = img.width;
  out.planes.resize(img.planes.size());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        out.planes[size_t((c * out.height + y) * out.width + x)] =
            img.at(c, img.height - 1 - x, y);
      }
    }
  }
  img = std::move(out);
}

void clip_and_drop(std::vector<BoxAnnotation>& boxes, int width, int height) {
  std::vector<BoxAnnotation> kept;
  for (BoxAnnotation b : boxes) {
    b.x1 = std::clamp(b.x1, 0.0, double(width));
    b.x2 = std::clamp(b.x2, 0.0, double(width));
    b.y1 = std::clamp(b.y1, 0.0, double(height));
    b.y2 = std::clamp(b.y2, 0.0, double(height));
    if (b.width() >= 2.0 && b.height() >= 2.0) kept.push_back(b);
  }
  boxes = std::move(kept);
}

}  // namespace

void augment(ImageF32& img, std::vector<BoxAnnotation>& boxes,
             const AugmentConfig& cfg, uint64_t seed) {
  if (!cfg.enabled) return;
  Rng rng(seed);

  if (cfg.p_flip > 0 && rng.bernoulli(cfg.p_flip)) {
    flip_image_h(img);
    for (auto& b : boxes) b = flip_box_h(b, img.width);
  }

  if (cfg.p_rot90 > 0 && rng.bernoulli(cfg.p_rot90)) {
    const int k = int(rng.uniform_int(int64_t(1), int64_t(3)));
    for (int i = 0; i < k; ++i) {
      for (auto& b : boxes) b = rot90_box(b, img.width, img.height);
      rot90_image(img);
    }
  }

  if (cfg.scale_lo != 1.0 || cfg.scale_hi != 1.0) {
    const double s = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    if (s != 1.0) {
      const double cx = img.width / 2.0, cy = img.height / 2.0;
      ImageF32 out = img;
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height; ++y) {
          for (int x = 0; x < img.width; ++x) {
            // nearest-neighbor pull from the inverse map
            const int sx = int(std::floor(cx + (x + 0.5 - cx) / s));
            const int sy = int(std::floor(cy + (y + 0.5 - cy) / s));
            out.at(c, y, x) =
                (sx >= 0 && sx < img.width && sy >= 0 && sy < img.height)
                    ? img.at(c, sy, sx)
                    : 0.f;
          }
        }
      }
      img = std::move(out);
      for (auto& b : boxes) {
        b = {cx + (b.x1 - cx) * s, cy + (b.y1 - cy) * s, cx + (b.x2 - cx) * s,
             cy + (b.y2 - cy) * s, b.class_id};
      }
      clip_and_drop(boxes, img.width, img.height);
    }
  }

  if (cfg.max_translate > 0) {
    const int dx = int(rng.uniform_int(-int64_t(cfg.max_translate),
                                       int64_t(cfg.max_translate)));
    const int dy = int(rng.uniform_int(-int64_t(cfg.max_translate),
                                       int64_t(cfg.max_translate)));
    if (dx != 0 || dy != 0) {
      ImageF32 out = img;
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height; ++y) {
          for (int x = 0; x < img.width; ++x) {
            const int sx = x - dx, sy = y - dy;
            out.at(c, y, x) =
                (sx >= 0 && sx < img.width && sy >= 0 && sy < img.height)
                    ? img.at(c, sy, sx)
                    : 0.f;
          }
        }
      }
      img = std::move(out);
      for (auto& b : boxes) {
        b.x1 += dx;
        b.x2 += dx;
        b.y1 += dy;
        b.y2 += dy;
      }
      clip_and_drop(boxes, img.width, img.height);
    }
  }

  if (cfg.brightness > 0) {
    const double d = rng.uniform(-cfg.brightness, cfg.brightness);
    for (auto& v : img.planes) v = std::clamp(v + float(d), 0.f, 1.f);
  }

  if (cfg.noise_sigma > 0) {
    for (auto& v : img.planes) {
      v = std::clamp(v + float(rng.normal(0.0, cfg.noise_sigma)), 0.f, 1.f);
    }
  }
}

// ---- batching ---------------------------------------------------------------

PairedBatcher::PairedBatcher(int num_source, int num_target, int batch_source,
                             int batch_target, uint64_t seed)
    : num_source_(num_source),
      num_target_(num_target),
      batch_source_(batch_source),
      batch_target_(batch_target),
      seed_(seed) {
  if (num_source < 1) throw ConfigError("batcher: empty source manifest");
  if (batch_source < 1 || batch_target < 1) {
    throw ConfigError("batcher: batch sizes must be >= 1");
  }
  steps_per_epoch_ = (num_source + batch_source - 1) / batch_source;
}

namespace {

std::vector<int> epoch_order(int n, uint64_t seed, int epoch, uint64_t tag) {
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[size_t(i)] = i;
  Rng rng(derive_seed(seed, tag, uint64_t(epoch)));
  rng.shuffle(order);
  return order;
}

}  // namespace

std::vector<int> PairedBatcher::source_indices(int epoch, int step) const {
  const auto order = epoch_order(num_source_, seed_, epoch, 0x736f7572ull);
  std::vector<int> out;
  const int begin = step * batch_source_;
  const int end = std::min(begin + batch_source_, num_source_);
  for (int i = begin; i < end; ++i) out.push_back(order[size_t(i)]);
  return out;
}

std::vector<int> PairedBatcher::target_indices(int epoch, int step) const {
  if (num_target_ < 1) return {};
  const auto order = epoch_order(num_target_, seed_, epoch, 0x74617267ull);
  std::vector<int> out;
  for (int j = 0; j < batch_target_; ++j) {
    const int pos = (step * batch_target_ + j) % num_target_;
    out.push_back(order[size_t(pos)]);
  }
  return out;
}

// ---- loading ----------------------------------------------------------------

const ImageU8& ImageCache::get(const std::string& path) {
  auto it = cache_.find(path);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(path, read_png(path)).first->second;
}

LoadedBatch load_batch(const DatasetManifest& manifest,
                       const std::vector<int>& indices, ImageCache& cache,
                       const AugmentConfig& aug, uint64_t aug_seed,
                       DType dtype) {
  if (indices.empty()) throw ConfigError("load_batch: empty index list");
  LoadedBatch batch;
  const ImageRecord& first = manifest.images[size_t(indices[0])];
  const int H = first.height, W = first.width;
  batch.images = Tensor::zeros({int64_t(indices.size()), 3, H, W}, dtype);

  for (size_t slot = 0; slot < indices.size(); ++slot) {
    const ImageRecord& rec = manifest.images[size_t(indices[slot])];
    if (rec.height != H || rec.width != W) {
      throw ShapeError("load_batch: image " + rec.file_name +
                       " size differs within batch");
    }
    ImageF32 img = dequantize(cache.get(manifest.image_path(size_t(indices[slot]))));
    std::vector<BoxAnnotation> boxes = rec.boxes;
    if (aug.enabled) {
      augment(img, boxes, aug, derive_seed(aug_seed, uint64_t(slot)));
    }
    const int64_t plane = int64_t(3) * H * W;
    if (dtype == DType::f32) {
      auto dst = batch.images.data<float>();
      std::copy(img.planes.begin(), img.planes.end(),
                dst.begin() + int64_t(slot) * plane);
    } else {
      auto dst = batch.images.data<double>();
      for (int64_t j = 0; j < plane; ++j) {
        dst[size_t(int64_t(slot) * plane + j)] = double(img.planes[size_t(j)]);
      }
    }
    batch.boxes.push_back(std::move(boxes));
  }
  return batch;
}

}  // namespace auda
