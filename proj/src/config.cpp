// Copyright 2026 The OIM Authors. All Rights Reserved.
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


#include "oim/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "oim/io.hpp"

namespace oim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ValidationError("config key '" + key + "': '" + value + "' is not " + what);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

// One entry per configurable field: a setter and a getter in text form.
struct Field {
  std::function<void(const std::string& key, const std::string& value)> set;
  std::function<std::string()> get;
};

template <typename T>
Field number_field(T& ref) {
  return {[&ref](const std::string& k, const std::string& v) { ref = parse_number<T>(k, v); },
          [&ref] {
            if constexpr (std::is_floating_point_v<T>) return format_double(ref);
            else return std::to_string(ref);
          }};
}

Field bool_field(bool& ref) {
  return {[&ref](const std::string& k, const std::string& v) { ref = parse_bool(k, v); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

std::map<std::string, Field> fields(TrainConfig& t, SynthConfig& s) {
  std::map<std::string, Field> f;
  f["iterations"] = number_field(t.iterations);
  f["lr1"] = number_field(t.lr1);
  f["lr2"] = number_field(t.lr2);
  f["lr_switch"] = number_field(t.lr_switch);
  f["alpha1"] = number_field(t.alpha1);
  f["alpha2"] = number_field(t.alpha2);
  f["alpha_switch"] = number_field(t.alpha_switch);
  f["iou_threshold"] = number_field(t.iou_threshold);
  f["include_core_in_davg"] = bool_field(t.include_core_in_davg);
  f["beta"] = number_field(t.beta);
  f["num_heads"] = number_field(t.num_heads);
  f["batch_size"] = number_field(t.batch_size);
  f["seed"] = number_field(t.seed);
  f["mode"] = {[&t](const std::string&, const std::string& v) { t.mode = parse_ablation_mode(v); },
               [&t] { return std::string(to_string(t.mode)); }};
  f["init_scale"] = number_field(t.init_scale);
  f["feature_noise"] = number_field(t.feature_noise);
  f["log_every"] = number_field(t.log_every);
  f["eval_top_k"] = number_field(t.eval_top_k);
  f["eval_nms"] = number_field(t.eval_nms);

  f["synth.seed"] = number_field(s.seed);
  f["synth.prototype_seed"] = number_field(s.prototype_seed);
  f["synth.num_images"] = number_field(s.num_images);
  f["synth.width"] = number_field(s.width);
  f["synth.height"] = number_field(s.height);
  f["synth.num_classes"] = number_field(s.num_classes);
  f["synth.max_active_classes"] = number_field(s.max_active_classes);
  for (int i = 0; i < 4; ++i) {
    f["synth.instance_weight_" + std::to_string(i + 1)] = number_field(s.instance_weights[i]);
  }
  f["synth.min_object_size"] = number_field(s.min_object_size);
  f["synth.max_object_size"] = number_field(s.max_object_size);
  f["synth.object_gap"] = number_field(s.object_gap);
  f["synth.feature_dim"] = number_field(s.feature_dim);
  f["synth.prototype_separation"] = number_field(s.prototype_separation);
  f["synth.noise_sigma"] = number_field(s.noise_sigma);
  f["synth.part_confound_strength"] = number_field(s.part_confound_strength);
  f["synth.part_fraction"] = number_field(s.part_fraction);
  f["synth.proposals_per_object"] = number_field(s.proposals_per_object);
  f["synth.background_proposals"] = number_field(s.background_proposals);
  return f;
}

}  // namespace

ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

ConfigMap load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

void apply_config(const ConfigMap& config, TrainConfig& train, SynthConfig& synth) {
  auto f = fields(train, synth);
  for (const auto& [key, value] : config) {
    auto it = f.find(key);
    if (it == f.end()) throw ValidationError("unknown config key '" + key + "'");
    it->second.set(key, value);
  }
}

ConfigMap config_snapshot(const TrainConfig& train, const SynthConfig& synth) {
  TrainConfig t = train;
  SynthConfig s = synth;
  ConfigMap out;
  for (const auto& [key, field] : fields(t, s)) out[key] = field.get();
  return out;
}

std::string format_config(const ConfigMap& config) {
  std::string text;
  for (const auto& [k, v] : config) text += k + " = " + v + "\n";
  return text;
}

}  // namespace oim
