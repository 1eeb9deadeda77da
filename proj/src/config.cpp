#include "auda/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

extern char** environ;

namespace auda {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(c));
  return s;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text,
                                  const std::string& origin) {
  ConfigFile cf;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": unterminated section header");
      }
      section = lower(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": expected key = value");
    }
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    cf.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cf;
}

bool ConfigFile::has(const std::string& key) const {
  return values_.count(lower(key)) > 0;
}

void ConfigFile::set(const std::string& key, const std::string& value) {
  values_[lower(key)] = value;
}

std::string ConfigFile::get_string(const std::string& key,
                                   const std::string& dflt) const {
  auto it = values_.find(lower(key));
  return it == values_.end() ? dflt : it->second;
}

double ConfigFile::get_double(const std::string& key, double dflt) const {
  auto it = values_.find(lower(key));
  if (it == values_.end()) return dflt;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("config key " + key + ": '" + it->second +
                     "' is not a number");
  }
}

int64_t ConfigFile::get_int(const std::string& key, int64_t dflt) const {
  auto it = values_.find(lower(key));
  if (it == values_.end()) return dflt;
  try {
    size_t pos = 0;
    int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("config key " + key + ": '" + it->second +
                     "' is not an integer");
  }
}

bool ConfigFile::get_bool(const std::string& key, bool dflt) const {
  auto it = values_.find(lower(key));
  if (it == values_.end()) return dflt;
  const std::string v = lower(it->second);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError("config key " + key + ": '" + it->second +
                   "' is not a boolean");
}

std::vector<int> ConfigFile::get_int_list(const std::string& key,
                                          const std::vector<int>& dflt) const {
  auto it = values_.find(lower(key));
  if (it == values_.end()) return dflt;
  std::vector<int> out;
  std::string item;
  std::istringstream ss(it->second);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ParseError("config key " + key + ": '" + item +
                       "' is not an integer");
    }
  }
  return out;
}

void ConfigFile::apply_env_overrides() {
  static const char* kSections[] = {"train", "loss",    "model",
                                    "codec", "augment", "data"};
  for (char** e = environ; e && *e; ++e) {
    std::string entry(*e);
    if (entry.rfind("AUDA_", 0) != 0) continue;
    const size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = lower(entry.substr(5, eq - 5));
    const std::string value = entry.substr(eq + 1);
    for (const char* sec : kSections) {
      const std::string prefix = std::string(sec) + "_";
      if (name.rfind(prefix, 0) == 0) {
        values_[std::string(sec) + "." + name.substr(prefix.size())] = value;
        break;
      }
    }
  }
}

void ConfigFile::merge_from(const ConfigFile& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string ConfigFile::serialize() const {
  std::string out;
  std::string cur_section;
  for (const auto& [key, value] : values_) {
    const size_t dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (section != cur_section) {
      if (!out.empty()) out += "\n";
      out += "[" + section + "]\n";
      cur_section = section;
    }
    out += name + " = " + value + "\n";
  }
  return out;
}

void ConfigFile::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << serialize();
}

// ---- TrainConfig binding ----------------------------------------------------

namespace {

DType parse_dtype(const std::string& s) {
  if (lower(s) == "f32") return DType::f32;
  if (lower(s) == "f64") return DType::f64;
  throw ParseError("dtype must be f32 or f64, got '" + s + "'");
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrainConfig train_config_from(const ConfigFile& cf) {
  TrainConfig tc;
  tc.mode = parse_uda_mode(cf.get_string("train.mode", "baseline"));
  tc.epochs = int(cf.get_int("train.epochs", tc.epochs));
  tc.lr = cf.get_double("train.lr", tc.lr);
  tc.weight_decay = cf.get_double("train.weight_decay", tc.weight_decay);
  tc.lr_decay_epoch = int(cf.get_int("train.lr_decay_epoch", tc.lr_decay_epoch));
  tc.lr_decay_gamma = cf.get_double("train.lr_decay_gamma", tc.lr_decay_gamma);
  tc.batch_source = int(cf.get_int("train.batch_source", tc.batch_source));
  tc.batch_target = int(cf.get_int("train.batch_target", tc.batch_target));
  tc.seed = uint64_t(cf.get_int("train.seed", int64_t(tc.seed)));
  tc.deterministic = cf.get_bool("train.deterministic", tc.deterministic);
  tc.threads = int(cf.get_int("train.threads", tc.threads));
  tc.dtype = parse_dtype(cf.get_string("train.dtype", "f32"));
  tc.checkpoint_every =
      int(cf.get_int("train.checkpoint_every", tc.checkpoint_every));
  tc.source_manifest = cf.get_string("train.source", "");
  tc.target_manifest = cf.get_string("train.target", "");
  tc.out_dir = cf.get_string("train.out_dir", tc.out_dir);
  tc.resume = cf.get_string("train.resume", "");

  tc.weights.lambda_h = cf.get_double("loss.lambda_h", tc.weights.lambda_h);
  tc.weights.lambda_size =
      cf.get_double("loss.lambda_size", tc.weights.lambda_size);
  tc.weights.lambda_off = cf.get_double("loss.lambda_off", tc.weights.lambda_off);
  tc.weights.lambda_ent = cf.get_double("loss.lambda_ent", tc.weights.lambda_ent);
  tc.weights.lambda_ms = cf.get_double("loss.lambda_ms", tc.weights.lambda_ms);
  tc.weights.alpha = cf.get_double("loss.alpha", tc.weights.alpha);
  tc.weights.beta = cf.get_double("loss.beta", tc.weights.beta);
  tc.softmax_on_logits =
      cf.get_bool("loss.softmax_on_logits", tc.softmax_on_logits);

  tc.arch.stem_channels = int(cf.get_int("model.stem_channels", tc.arch.stem_channels));
  tc.arch.stage_channels = cf.get_int_list("model.stage_channels", tc.arch.stage_channels);
  tc.arch.res_blocks = int(cf.get_int("model.res_blocks", tc.arch.res_blocks));
  tc.arch.head_channels = int(cf.get_int("model.head_channels", tc.arch.head_channels));
  tc.arch.num_classes = int(cf.get_int("model.num_classes", tc.arch.num_classes));
  tc.arch.stride = int(cf.get_int("model.r", tc.arch.stride));

  tc.min_overlap = cf.get_double("codec.min_overlap", tc.min_overlap);
  tc.top_k = int(cf.get_int("codec.top_k", tc.top_k));
  tc.score_threshold = cf.get_double("codec.score_threshold", tc.score_threshold);

  tc.augment.enabled = cf.get_bool("augment.enabled", tc.augment.enabled);
  tc.augment.p_flip = cf.get_double("augment.p_flip", tc.augment.p_flip);
  tc.augment.p_rot90 = cf.get_double("augment.p_rot90", tc.augment.p_rot90);
  tc.augment.max_translate =
      int(cf.get_int("augment.max_translate", tc.augment.max_translate));
  tc.augment.scale_lo = cf.get_double("augment.scale_lo", tc.augment.scale_lo);
  tc.augment.scale_hi = cf.get_double("augment.scale_hi", tc.augment.scale_hi);
  tc.augment.brightness = cf.get_double("augment.brightness", tc.augment.brightness);
  tc.augment.noise_sigma = cf.get_double("augment.noise_sigma", tc.augment.noise_sigma);
  tc.augment_source = cf.get_bool("augment.source", tc.augment_source);
  tc.augment_target = cf.get_bool("augment.target", tc.augment_target);
  return tc;
}

ConfigFile train_config_to(const TrainConfig& tc) {
  ConfigFile cf;
  cf.set("train.mode", uda_mode_name(tc.mode));
  cf.set("train.epochs", std::to_string(tc.epochs));
  cf.set("train.lr", fmt(tc.lr));
  cf.set("train.weight_decay", fmt(tc.weight_decay));
  cf.set("train.lr_decay_epoch", std::to_string(tc.lr_decay_epoch));
  cf.set("train.lr_decay_gamma", fmt(tc.lr_decay_gamma));
  cf.set("train.batch_source", std::to_string(tc.batch_source));
  cf.set("train.batch_target", std::to_string(tc.batch_target));
  cf.set("train.seed", std::to_string(tc.seed));
  cf.set("train.deterministic", tc.deterministic ? "true" : "false");
  cf.set("train.threads", std::to_string(tc.threads));
  cf.set("train.dtype", dtype_name(tc.dtype));
  cf.set("train.checkpoint_every", std::to_string(tc.checkpoint_every));
  cf.set("train.source", tc.source_manifest);
  cf.set("train.target", tc.target_manifest);
  cf.set("train.out_dir", tc.out_dir);
  cf.set("train.resume", tc.resume);

  cf.set("loss.lambda_h", fmt(tc.weights.lambda_h));
  cf.set("loss.lambda_size", fmt(tc.weights.lambda_size));
  cf.set("loss.lambda_off", fmt(tc.weights.lambda_off));
  cf.set("loss.lambda_ent", fmt(tc.weights.lambda_ent));
  cf.set("loss.lambda_ms", fmt(tc.weights.lambda_ms));
  cf.set("loss.alpha", fmt(tc.weights.alpha));
  cf.set("loss.beta", fmt(tc.weights.beta));
  cf.set("loss.softmax_on_logits", tc.softmax_on_logits ? "true" : "false");

  cf.set("model.stem_channels", std::to_string(tc.arch.stem_channels));
  cf.set("model.stage_channels", join_ints(tc.arch.stage_channels));
  cf.set("model.res_blocks", std::to_string(tc.arch.res_blocks));
  cf.set("model.head_channels", std::to_string(tc.arch.head_channels));
  cf.set("model.num_classes", std::to_string(tc.arch.num_classes));
  cf.set("model.r", std::to_string(tc.arch.stride));

  cf.set("codec.min_overlap", fmt(tc.min_overlap));
  cf.set("codec.top_k", std::to_string(tc.top_k));
  cf.set("codec.score_threshold", fmt(tc.score_threshold));

  cf.set("augment.enabled", tc.augment.enabled ? "true" : "false");
  cf.set("augment.p_flip", fmt(tc.augment.p_flip));
  cf.set("augment.p_rot90", fmt(tc.augment.p_rot90));
  cf.set("augment.max_translate", std::to_string(tc.augment.max_translate));
  cf.set("augment.scale_lo", fmt(tc.augment.scale_lo));
  cf.set("augment.scale_hi", fmt(tc.augment.scale_hi));
  cf.set("augment.brightness", fmt(tc.augment.brightness));
  cf.set("augment.noise_sigma", fmt(tc.augment.noise_sigma));
  cf.set("augment.source", tc.augment_source ? "true" : "false");
  cf.set("augment.target", tc.augment_target ? "true" : "false");
  return cf;
}

GenerateConfig generate_config_from(const ConfigFile& cf) {
  GenerateConfig gc;
  gc.scene.height = int(cf.get_int("data.image_size", gc.scene.height));
  gc.scene.width = gc.scene.height;
  gc.scene.num_classes = int(cf.get_int("data.num_classes", gc.scene.num_classes));
  gc.scene.min_objects = int(cf.get_int("data.min_objects", gc.scene.min_objects));
  gc.scene.max_objects = int(cf.get_int("data.max_objects", gc.scene.max_objects));
  gc.scene.min_size = cf.get_double("data.min_size", gc.scene.min_size);
  gc.scene.max_size = cf.get_double("data.max_size", gc.scene.max_size);
  gc.scene.style = parse_domain(cf.get_string("data.domain", "source"));
  gc.scene.texture_amp = cf.get_double("data.texture_amp", gc.scene.texture_amp);
  gc.scene.intensity_shift =
      cf.get_double("data.intensity_shift", gc.scene.intensity_shift);
  gc.scene.blur_passes = int(cf.get_int("data.blur_passes", gc.scene.blur_passes));
  gc.scene.noise_sigma_lo =
      cf.get_double("data.noise_sigma_lo", gc.scene.noise_sigma_lo);
  gc.scene.noise_sigma_hi =
      cf.get_double("data.noise_sigma_hi", gc.scene.noise_sigma_hi);
  gc.count = int(cf.get_int("data.count", gc.count));
  gc.seed = uint64_t(cf.get_int("data.seed", int64_t(gc.seed)));
  gc.labeled = cf.get_bool("data.labeled", gc.labeled);
  gc.split = cf.get_string("data.split", gc.split);
  gc.out_dir = cf.get_string("data.out_dir", gc.out_dir);
  return gc;
}

ConfigFile generate_config_to(const GenerateConfig& gc) {
  ConfigFile cf;
  cf.set("data.image_size", std::to_string(gc.scene.height));
  cf.set("data.num_classes", std::to_string(gc.scene.num_classes));
  cf.set("data.min_objects", std::to_string(gc.scene.min_objects));
  cf.set("data.max_objects", std::to_string(gc.scene.max_objects));
  cf.set("data.min_size", fmt(gc.scene.min_size));
  cf.set("data.max_size", fmt(gc.scene.max_size));
  cf.set("data.domain", domain_name(gc.scene.style));
  cf.set("data.texture_amp", fmt(gc.scene.texture_amp));
  cf.set("data.intensity_shift", fmt(gc.scene.intensity_shift));
  cf.set("data.blur_passes", std::to_string(gc.scene.blur_passes));
  cf.set("data.noise_sigma_lo", fmt(gc.scene.noise_sigma_lo));
  cf.set("data.noise_sigma_hi", fmt(gc.scene.noise_sigma_hi));
  cf.set("data.count", std::to_string(gc.count));
  cf.set("data.seed", std::to_string(gc.seed));
  cf.set("data.labeled", gc.labeled ? "true" : "false");
  cf.set("data.split", gc.split);
  cf.set("data.out_dir", gc.out_dir);
  return cf;
}

}  // namespace auda
