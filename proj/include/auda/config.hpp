#pragma once

#include <map>
#include <string>
#include <vector>

#include "auda/data.hpp"
#include "auda/losses.hpp"
#include "auda/model.hpp"

namespace auda {

// Flat key-value store with [section] grouping. Keys are "section.key".
class ConfigFile {
 public:
  ConfigFile() = default;
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_text(const std::string& text,
                               const std::string& origin = "<text>");

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key, double dflt) const;
  int64_t get_int(const std::string& key, int64_t dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& dflt) const;

  // Applies AUDA_<SECTION>_<KEY>=value environment overrides.
  void apply_env_overrides();

  // Copies every entry of `other` over this one.
  void merge_from(const ConfigFile& other);

  std::string serialize() const;
  void write_file(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Full experiment configuration; defaults follow the reference training
// recipe (Adam 1e-4, weight decay 1e-4, step decay at epoch 30 by 0.1,
// batch 16 per domain, peak threshold 0.1).
struct TrainConfig {
  UdaMode mode = UdaMode::baseline;
  int epochs = 40;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int lr_decay_epoch = 30;
  double lr_decay_gamma = 0.1;
  int batch_source = 16;
  int batch_target = 16;
  uint64_t seed = 1;
  bool deterministic = false;
  int threads = 0;  // 0 = hardware concurrency
  DType dtype = DType::f32;
  int checkpoint_every = 0;  // epochs; 0 = final only

  LossWeights weights;
  bool softmax_on_logits = false;

  ArchDescriptor arch;  // includes num_classes and R

  double min_overlap = 0.7;
  int top_k = 100;
  double score_threshold = 0.1;

  AugmentConfig augment;
  bool augment_source = true;
  bool augment_target = false;

  std::string source_manifest;
  std::string target_manifest;
  std::string out_dir = "runs/run";
  std::string resume;

  double effective_lr(int epoch) const {
    return epoch >= lr_decay_epoch ? lr * lr_decay_gamma : lr;
  }
};

TrainConfig train_config_from(const ConfigFile& cf);
ConfigFile train_config_to(const TrainConfig& tc);

// Scene generation settings for the generate-data command.
struct GenerateConfig {
  SceneSpec scene;
  int count = 100;
  uint64_t seed = 1;
  bool labeled = true;
  std::string split = "train";
  std::string out_dir = "data/out";
};

GenerateConfig generate_config_from(const ConfigFile& cf);
ConfigFile generate_config_to(const GenerateConfig& gc);

}  // namespace auda
