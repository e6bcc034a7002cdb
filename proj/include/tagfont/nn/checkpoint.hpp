#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "tagfont/nn/layers.hpp"
#include "tagfont/nn/tensor.hpp"

namespace tagfont::nn {

// Versioned binary container of named text blobs and named tensors.
//
// Layout (little-endian):
//   "TFCK" | u32 version | u32 n_text | u32 n_tensor
//   n_text   x (str name, str value)
//   n_tensor x (str name, u32 rank, i32 dims[rank], f64 data[])
// where str = u32 length + bytes. Entries are written in name order so the
// same contents always produce the same bytes.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void set_text(const std::string& key, std::string value) { text_[key] = std::move(value); }
  bool has_text(const std::string& key) const { return text_.count(key) != 0; }
  const std::string& text(const std::string& key) const;

  void put(const ParameterList& params, const std::string& prefix);
  // Copies stored values into params; throws FormatError on missing names or
  // shape mismatch.
  void get(const ParameterList& params, const std::string& prefix) const;
  bool has_tensor(const std::string& name) const { return tensors_.count(name) != 0; }
  void set_tensor(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }
  const Tensor& tensor(const std::string& name) const;

  // Copies every entry of other whose name is not already present.
  void merge_from(const Checkpoint& other);

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  const std::map<std::string, std::string>& texts() const { return text_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

 private:
  std::map<std::string, std::string> text_;
  std::map<std::string, Tensor> tensors_;
};

}  // namespace tagfont::nn
