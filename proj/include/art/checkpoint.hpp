#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "art/error.hpp"
#include "art/mlp.hpp"

// Checkpoint container.
//
// Layout of a checkpoint file:
//
//   ART-CHECKPOINT 1
//   text <name> <offset> <bytes>
//   tensor <name> <rows> <cols> <offset>
//   ...
//   end
//   <payload>
//
// The manifest is ASCII, one entry per line, sorted by name. Offsets are
// byte offsets into the payload, which starts right after the "end\n" line.
// Tensors are stored column-major as IEEE-754 binary64 in host byte order
// (little-endian on every supported platform). Text entries are raw bytes.
namespace art {

class TensorArchive {
 public:
  void put(const std::string& name, const Eigen::MatrixXd& m) { tensors_[check_name(name)] = m; }
  void put_text(const std::string& name, std::string value) { texts_[check_name(name)] = std::move(value); }

  const Eigen::MatrixXd& tensor(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error("checkpoint: missing tensor '" + name + "'");
    return it->second;
  }

  const std::string& text(const std::string& name) const {
    auto it = texts_.find(name);
    if (it == texts_.end()) throw Error("checkpoint: missing entry '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return tensors_.count(name) || texts_.count(name); }

  const std::map<std::string, Eigen::MatrixXd>& tensors() const { return tensors_; }

  std::string serialize() const {
    std::ostringstream manifest;
    std::string payload;
    manifest << "ART-CHECKPOINT 1\n";
    for (const auto& [name, value] : texts_) {
      manifest << "text " << name << ' ' << payload.size() << ' ' << value.size() << '\n';
      payload += value;
    }
    for (const auto& [name, m] : tensors_) {
      manifest << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << ' ' << payload.size() << '\n';
      const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
      const auto start = payload.size();
      payload.resize(start + bytes);
      if (bytes) std::memcpy(payload.data() + start, m.data(), bytes);
    }
    manifest << "end\n";
    return manifest.str() + payload;
  }

  static TensorArchive deserialize(const std::string& blob) {
    TensorArchive ar;
    const auto end_marker = blob.find("\nend\n");
    if (blob.rfind("ART-CHECKPOINT 1\n", 0) != 0 || end_marker == std::string::npos)
      throw Error("checkpoint: not an ART checkpoint");
    const std::size_t payload_start = end_marker + 5;
    const std::size_t payload_size = blob.size() - payload_start;
    std::istringstream manifest(blob.substr(0, end_marker + 1));
    std::string line;
    std::getline(manifest, line);  // header
    while (std::getline(manifest, line)) {
      std::istringstream ls(line);
      std::string kind, name;
      ls >> kind >> name;
      if (kind == "text") {
        std::size_t off = 0, len = 0;
        ls >> off >> len;
        if (!ls || off + len > payload_size) throw Error("checkpoint: bad text entry '" + name + "'");
        ar.texts_[name] = blob.substr(payload_start + off, len);
      } else if (kind == "tensor") {
        Eigen::Index rows = 0, cols = 0;
        std::size_t off = 0;
        ls >> rows >> cols >> off;
        const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
        if (!ls || rows < 0 || cols < 0 || off + bytes > payload_size)
          throw Error("checkpoint: bad tensor entry '" + name + "'");
        Eigen::MatrixXd m(rows, cols);
        if (bytes) std::memcpy(m.data(), blob.data() + payload_start + off, bytes);
        ar.tensors_[name] = std::move(m);
      } else {
        throw Error("checkpoint: unknown manifest line '" + line + "'");
      }
    }
    return ar;
  }

  // Writes through a temporary file and renames, so a rolling checkpoint is
  // never left half-written.
  void write(const std::filesystem::path& path) const {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("checkpoint: cannot write " + tmp.string());
      const auto blob = serialize();
      out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
      if (!out) throw Error("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  static TensorArchive read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
  }

 private:
  static const std::string& check_name(const std::string& name) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
      throw Error("checkpoint: invalid entry name '" + name + "'");
    return name;
  }

  std::map<std::string, Eigen::MatrixXd> tensors_;
  std::map<std::string, std::string> texts_;
};

inline Eigen::MatrixXd as_column(const Eigen::VectorXd& v) { return Eigen::MatrixXd(v); }

namespace mlp {

inline void save(const DenseNet& net, TensorArchive& ar, const std::string& prefix) {
  std::string dims;
  for (std::size_t i = 0; i < net.dims.size(); ++i) dims += (i ? "," : "") + std::to_string(net.dims[i]);
  ar.put_text(prefix + ".dims", dims);
  ar.put_text(prefix + ".head", net.head == Head::kSimplex ? "simplex" : "squash");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    ar.put(prefix + ".layer" + std::to_string(l) + ".weight", net.layers[l].weight);
    ar.put(prefix + ".layer" + std::to_string(l) + ".bias", as_column(net.layers[l].bias));
  }
}

inline DenseNet load_net(const TensorArchive& ar, const std::string& prefix) {
  DenseNet net;
  std::istringstream dims(ar.text(prefix + ".dims"));
  std::string item;
  while (std::getline(dims, item, ',')) net.dims.push_back(std::stoul(item));
  const auto& head = ar.text(prefix + ".head");
  if (head != "simplex" && head != "squash") throw Error("checkpoint: unknown head '" + head + "'");
  net.head = head == "simplex" ? Head::kSimplex : Head::kSquash;
  for (std::size_t l = 0; l + 1 < net.dims.size(); ++l) {
    DenseLayer layer{ar.tensor(prefix + ".layer" + std::to_string(l) + ".weight"),
                     ar.tensor(prefix + ".layer" + std::to_string(l) + ".bias").col(0)};
    if (layer.weight.rows() != static_cast<Eigen::Index>(net.dims[l]) ||
        layer.weight.cols() != static_cast<Eigen::Index>(net.dims[l + 1]))
      throw Error("checkpoint: weight shape mismatch in " + prefix);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline void save(const OptimizerState& s, TensorArchive& ar, const std::string& prefix) {
  std::ostringstream meta;
  meta.precision(17);
  meta << s.step << ' ' << s.learning_rate << ' ' << s.beta1 << ' ' << s.beta2 << ' ' << s.epsilon;
  ar.put_text(prefix + ".meta", meta.str());
  for (std::size_t l = 0; l < s.moments.first.size(); ++l) {
    const auto tag = prefix + ".layer" + std::to_string(l);
    ar.put(tag + ".m.weight", s.moments.first[l].weight);
    ar.put(tag + ".m.bias", as_column(s.moments.first[l].bias));
    ar.put(tag + ".v.weight", s.moments.second[l].weight);
    ar.put(tag + ".v.bias", as_column(s.moments.second[l].bias));
  }
}

inline OptimizerState load_optimizer(const TensorArchive& ar, const std::string& prefix, std::size_t n_layers) {
  OptimizerState s;
  std::istringstream meta(ar.text(prefix + ".meta"));
  meta >> s.step >> s.learning_rate >> s.beta1 >> s.beta2 >> s.epsilon;
  if (!meta) throw Error("checkpoint: corrupt optimizer metadata in " + prefix);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto tag = prefix + ".layer" + std::to_string(l);
    s.moments.first.push_back({ar.tensor(tag + ".m.weight"), ar.tensor(tag + ".m.bias").col(0)});
    s.moments.second.push_back({ar.tensor(tag + ".v.weight"), ar.tensor(tag + ".v.bias").col(0)});
  }
  return s;
}

}  // namespace mlp
}  // namespace art
