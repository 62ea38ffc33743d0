#include "vdepth/param_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "vdepth/autograd.hpp"

namespace vdepth {

Tensor& ParamStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) throw std::invalid_argument("parameter already exists: " + name);
  init.set_requires_grad(true);
  auto [it, ok] = params_.emplace(name, std::move(init));
  (void)ok;
  AdamState st;
  st.m = Tensor::zeros(it->second.shape());
  st.v = Tensor::zeros(it->second.shape());
  opt_.emplace(name, std::move(st));
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("no such parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("no such parameter: " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) != 0; }

int64_t ParamStore::parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParamStore::adamw_step(const std::map<std::string, Tensor>& grads, double lr, double beta1,
                            double beta2, double eps, double weight_decay) {
  for (const auto& [name, g] : grads)
    if (!params_.count(name)) throw std::invalid_argument("adamw_step: unknown parameter " + name);

  for (auto& [name, p] : params_) {
    auto git = grads.find(name);
    AdamState& st = opt_.at(name);
    st.step += 1;
    auto& pv = p.mutable_values();
    auto& mv = st.m.mutable_values();
    auto& vv = st.v.mutable_values();

    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));

    const std::vector<double>* gv = nullptr;
    if (git != grads.end()) {
      if (git->second.shape() != p.shape())
        throw std::invalid_argument("adamw_step: gradient shape mismatch for " + name);
      gv = &git->second.values();
    }
    for (size_t i = 0; i < pv.size(); ++i) {
      const double g = gv ? (*gv)[i] : 0.0;
      pv[i] -= lr * weight_decay * pv[i];
      mv[i] = beta1 * mv[i] + (1.0 - beta1) * g;
      vv[i] = beta2 * vv[i] + (1.0 - beta2) * g * g;
      const double mhat = mv[i] / bc1;
      const double vhat = vv[i] / bc2;
      pv[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      if (!std::isfinite(pv[i]))
        throw std::runtime_error("adamw_step: non-finite parameter value in " + name);
    }
  }
}

std::map<std::string, Tensor> backward_gradients(const Tensor& loss, const ParamStore& params) {
  autograd_backward(loss);
  std::map<std::string, Tensor> out;
  for (const auto& [name, p] : params.all()) {
    if (p.has_grad())
      out.emplace(name, Tensor::from_vector(p.shape(), p.grad_values()));
    else
      out.emplace(name, Tensor::zeros(p.shape()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {
constexpr char kMagic[8] = {'V', 'D', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64_le(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64_le(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) {
    uint64_t bits;
    std::memcpy(&bits, &x, 8);
    write_u64_le(os, bits);
  }
}
}  // namespace

void ParamStore::save(const std::string& path, const std::string& meta_json) const {
  nlohmann::json index;
  index["format"] = 1;
  index["tensors"] = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : params_) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = offset;
    index["tensors"].push_back(e);
    offset += static_cast<uint64_t>(t.numel()) * 8;
  }
  if (!meta_json.empty()) index["meta"] = nlohmann::json::parse(meta_json);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  const std::string header = index.dump();
  write_u64_le(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, t] : params_) write_f64_le(os, t.values());
  if (!os) throw std::runtime_error("short write on checkpoint: " + path);
}

ParamStore ParamStore::load(const std::string& path, std::string* meta_json) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const uint64_t header_len = read_u64_le(is);
  std::string header(header_len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw std::runtime_error("truncated checkpoint header: " + path);
  nlohmann::json index = nlohmann::json::parse(header);
  if (meta_json) *meta_json = index.contains("meta") ? index["meta"].dump() : std::string();

  const std::streampos payload_start = is.tellg();
  ParamStore store;
  for (const auto& e : index["tensors"]) {
    const std::string name = e["name"];
    const std::vector<int> shape = e["shape"].get<std::vector<int>>();
    const uint64_t offset = e["offset"];
    const int64_t n = shape_numel(shape);
    is.seekg(payload_start + static_cast<std::streamoff>(offset));
    std::vector<double> data(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      const uint64_t bits = read_u64_le(is);
      double x;
      std::memcpy(&x, &bits, 8);
      data[static_cast<size_t>(i)] = x;
    }
    if (!is) throw std::runtime_error("truncated checkpoint payload: " + path);
    store.create(name, Tensor::from_vector(shape, std::move(data)));
  }
  return store;
}

}  // namespace vdepth
