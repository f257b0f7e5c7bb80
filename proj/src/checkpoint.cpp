#include "arn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace arn {

namespace {

void put_f32_le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const char* p) {
  const std::uint32_t bits = static_cast<std::uint8_t>(p[0]) |
                             (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[1])) << 8) |
                             (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[2])) << 16) |
                             (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[3])) << 24);
  return std::bit_cast<float>(bits);
}

std::string ints_csv(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> parse_ints_csv(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

std::string stages_str(const std::vector<CnnStageSpec>& stages) {
  std::string s;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(stages[i].kernel) + "," + std::to_string(stages[i].stride) + "," +
         std::to_string(stages[i].filters) + "," + std::to_string(stages[i].pool);
  }
  return s;
}

std::vector<CnnStageSpec> parse_stages(const std::string& s) {
  std::vector<CnnStageSpec> out;
  std::istringstream is(s);
  std::string group;
  while (std::getline(is, group, ';')) {
    const auto nums = parse_ints_csv(group);
    if (nums.size() != 4) throw IoError("bad conv stage spec: " + group);
    out.push_back({nums[0], nums[1], nums[2], nums[3]});
  }
  return out;
}

}  // namespace

std::string model_spec_to_manifest(const ModelSpec& spec) {
  std::ostringstream os;
  os << "kind=" << model_kind_name(spec.kind) << '\n';
  os << "input_t=" << spec.input_t << '\n';
  os << "channels=" << spec.channels << '\n';
  os << "classes=" << spec.classes << '\n';
  os << "arn.t_narrow=" << spec.arn.t_narrow << '\n';
  os << "arn.t_wide=" << spec.arn.t_wide << '\n';
  os << "arn.base_width=" << spec.arn.base_width << '\n';
  os << "arn.resnet50_order=" << (spec.arn.resnet50_order ? 1 : 0) << '\n';
  os << "arn.bn_epsilon=" << spec.arn.bn_epsilon << '\n';
  os << "mlp_units=" << ints_csv(spec.mlp_units) << '\n';
  os << "cnn_stages=" << stages_str(spec.cnn_stages) << '\n';
  os << "cnn_dense=" << spec.cnn_dense << '\n';
  os << "lstm_hidden=" << spec.lstm_hidden << '\n';
  os << "lstm_proj=" << spec.lstm_proj << '\n';
  os << "lstm_layers=" << spec.lstm_layers << '\n';
  os << "hybrid_hidden=" << spec.hybrid_hidden << '\n';
  os << "hybrid_conv=" << stages_str({spec.hybrid_conv}) << '\n';
  os << "ae_hidden=" << spec.ae_hidden << '\n';
  os << "ae_bottleneck=" << spec.ae_bottleneck << '\n';
  os << "head_dense=" << spec.head_dense << '\n';
  os << "dropout_rate=" << spec.dropout_rate << '\n';
  return os.str();
}

ModelSpec model_spec_from_manifest(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError("manifest missing key: " + key);
    return it->second;
  };
  ModelSpec spec;
  spec.kind = model_kind_from_string(need("kind"));
  spec.input_t = std::stoi(need("input_t"));
  spec.channels = std::stoi(need("channels"));
  spec.classes = std::stoi(need("classes"));
  spec.arn.t_narrow = std::stoi(need("arn.t_narrow"));
  spec.arn.t_wide = std::stoi(need("arn.t_wide"));
  spec.arn.base_width = std::stoi(need("arn.base_width"));
  spec.arn.resnet50_order = std::stoi(need("arn.resnet50_order")) != 0;
  spec.arn.bn_epsilon = std::stod(need("arn.bn_epsilon"));
  spec.mlp_units = parse_ints_csv(need("mlp_units"));
  spec.cnn_stages = parse_stages(need("cnn_stages"));
  spec.cnn_dense = std::stoi(need("cnn_dense"));
  spec.lstm_hidden = std::stoi(need("lstm_hidden"));
  spec.lstm_proj = std::stoi(need("lstm_proj"));
  spec.lstm_layers = std::stoi(need("lstm_layers"));
  spec.hybrid_hidden = std::stoi(need("hybrid_hidden"));
  const auto hc = parse_stages(need("hybrid_conv"));
  if (hc.size() != 1) throw IoError("manifest hybrid_conv must hold one stage");
  spec.hybrid_conv = hc[0];
  spec.ae_hidden = std::stoi(need("ae_hidden"));
  spec.ae_bottleneck = std::stoi(need("ae_bottleneck"));
  spec.head_dense = std::stoi(need("head_dense"));
  spec.dropout_rate = std::stod(need("dropout_rate"));
  return spec;
}

void checkpoint_save(Model& model, const std::string& path) {
  const auto params = model.named_params();
  std::ostringstream manifest;
  manifest << kCheckpointVersion << '\n';
  manifest << model_spec_to_manifest(model.spec());
  std::string payload;
  for (const auto& np : params) {
    manifest << "param=" << np.name;
    for (int d : np.tensor.shape()) manifest << ' ' << d;
    manifest << '\n';
    for (double v : np.tensor.data()) put_f32_le(payload, static_cast<float>(v));
  }
  manifest << "payload_bytes=" << payload.size() << '\n';
  manifest << "---\n";

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write checkpoint: " + path);
  const std::string head = manifest.str();
  file.write(head.data(), static_cast<std::streamsize>(head.size()));
  file.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!file) throw IoError("checkpoint write failed: " + path);
}

std::unique_ptr<Model> checkpoint_load(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(file, line) || line != kCheckpointVersion)
    throw IoError(path + ": checkpoint version mismatch (expected " +
                  std::string(kCheckpointVersion) + ", got '" + line + "')");

  std::string spec_text;
  std::vector<std::pair<std::string, Shape>> entries;
  std::size_t payload_bytes = 0;
  bool saw_delimiter = false;
  while (std::getline(file, line)) {
    if (line == "---") {
      saw_delimiter = true;
      break;
    }
    if (line.rfind("param=", 0) == 0) {
      std::istringstream is(line.substr(6));
      std::string name;
      is >> name;
      Shape shape;
      int d;
      while (is >> d) shape.push_back(d);
      if (name.empty() || shape.empty()) throw IoError(path + ": bad param line: " + line);
      entries.emplace_back(name, shape);
    } else if (line.rfind("payload_bytes=", 0) == 0) {
      payload_bytes = std::stoull(line.substr(14));
    } else {
      spec_text += line;
      spec_text += '\n';
    }
  }
  if (!saw_delimiter) throw IoError(path + ": missing payload delimiter");

  std::string payload(payload_bytes, '\0');
  file.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::size_t>(file.gcount()) != payload_bytes)
    throw IoError(path + ": truncated payload (expected " + std::to_string(payload_bytes) +
                  " bytes, got " + std::to_string(file.gcount()) + ")");

  const ModelSpec spec = model_spec_from_manifest(spec_text);
  auto model = build_model(spec, /*seed=*/0);
  auto params = model->named_params();
  if (params.size() != entries.size())
    throw IoError(path + ": parameter count mismatch (model " + std::to_string(params.size()) +
                  ", manifest " + std::to_string(entries.size()) + ")");

  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != entries[i].first)
      throw IoError(path + ": parameter order mismatch at '" + entries[i].first + "'");
    if (params[i].tensor.shape() != entries[i].second)
      throw IoError(path + ": shape mismatch for '" + entries[i].first + "'");
    auto data = params[i].tensor.data();
    if (offset + data.size() * 4 > payload_bytes)
      throw IoError(path + ": payload shorter than manifest shapes require");
    for (auto& v : data) {
      v = static_cast<double>(get_f32_le(payload.data() + offset));
      offset += 4;
    }
  }
  if (offset != payload_bytes)
    throw IoError(path + ": payload longer than manifest shapes require");
  return model;
}

}  // namespace arn
