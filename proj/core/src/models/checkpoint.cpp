#include "survxai/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "survxai/error.hpp"

namespace survxai::models {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'X', 'C', 'K', 'P', '0', '0', '0', '1'};

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v{};
    need(sizeof v);
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void floats(float* dst, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError(IoError::Kind::truncated, "checkpoint truncated: " + path_);
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, std::uint64_t spec_hash,
                      const std::vector<const ParamStore*>& stores) {
  std::string out(kMagic, sizeof kMagic);
  put(out, spec_hash);
  put(out, static_cast<std::uint32_t>(stores.size()));
  for (const ParamStore* s : stores) {
    put(out, static_cast<std::uint32_t>(s->size()));
    for (const Parameter& p : s->all()) {
      put(out, static_cast<std::uint32_t>(p.name.size()));
      out += p.name;
      put(out, static_cast<std::uint32_t>(p.value.rank()));
      for (std::size_t d : p.value.shape()) put(out, static_cast<std::uint32_t>(d));
    }
  }
  for (const ParamStore* s : stores) {
    for (const Parameter& p : s->all()) {
      out.append(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(float));
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(IoError::Kind::write_failed, "cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(IoError::Kind::write_failed, "short write to checkpoint " + path.string());
}

void read_checkpoint(const std::filesystem::path& path, std::uint64_t spec_hash,
                     const std::vector<ParamStore*>& stores) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(IoError::Kind::open_failed, "cannot open checkpoint " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(f), {}), path.string());
  if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw IoError(IoError::Kind::bad_magic, "not a checkpoint file: " + path.string());
  }
  if (r.get<std::uint64_t>() != spec_hash) {
    throw ValidationError("checkpoint " + path.string() + " was written for a different model spec");
  }
  if (r.get<std::uint32_t>() != stores.size()) throw ValidationError("checkpoint store count mismatch");
  for (ParamStore* s : stores) {
    if (r.get<std::uint32_t>() != s->size()) throw ValidationError("checkpoint parameter count mismatch");
    for (std::size_t i = 0; i < s->size(); ++i) {
      const Parameter& p = (*s)[i];
      const std::string name = r.str(r.get<std::uint32_t>());
      if (name != p.name) throw ValidationError("checkpoint parameter '" + name + "' where '" + p.name + "' expected");
      Shape shape(r.get<std::uint32_t>());
      for (std::size_t& d : shape) d = r.get<std::uint32_t>();
      if (shape != p.value.shape()) {
        throw ShapeError("checkpoint shape " + tensor::shape_string(shape) + " for " + name + ", expected " +
                         tensor::shape_string(p.value.shape()));
      }
    }
  }
  for (ParamStore* s : stores) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      Tensor& t = (*s)[i].value;
      r.floats(t.data(), t.size());
    }
  }
  if (!r.done()) throw IoError(IoError::Kind::parse, "trailing bytes in checkpoint " + path.string());
}

void save(const Autoencoder& model, const std::filesystem::path& path) {
  write_checkpoint(path, model.spec().hash(), {&model.encoder.params, &model.decoder});
}

Autoencoder load_autoencoder(const AutoencoderSpec& spec, const std::filesystem::path& path) {
  Autoencoder m(spec, 0);
  read_checkpoint(path, spec.hash(), {&m.encoder.params, &m.decoder});
  return m;
}

void save(const Classifier& model, const std::filesystem::path& path) {
  write_checkpoint(path, model.spec().hash(), {&model.encoder.params, &model.head});
}

Classifier load_classifier(const ClassifierSpec& spec, const std::filesystem::path& path) {
  Classifier m(spec, 0);
  read_checkpoint(path, spec.hash(), {&m.encoder.params, &m.head});
  return m;
}

}  // namespace survxai::models
