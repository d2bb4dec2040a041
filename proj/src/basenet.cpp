#include "rsen/basenet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "rsen/errors.hpp"
#include "rsen/rng.hpp"

namespace rsen {

namespace {

void check_dims(NetDims d) {
  if (d.n < 1 || d.p < 1 || d.k < 1)
    throw ParamError("init_params: n, p, k must be positive");
  if (d.w < 4 || d.w % 4 != 0)
    throw ParamError("init_params: w must be a multiple of 4 and >= 4, got " + std::to_string(d.w));
}

}  // namespace

BaseNetParams BaseNetParams::zeros(NetDims dims) {
  check_dims(dims);
  const int ch = NetDims::kChannels;
  BaseNetParams p;
  p.dims = dims;
  p.w_spe = Tensor({NetDims::kSpectralWidth, dims.n});
  p.b_spe = Tensor({NetDims::kSpectralWidth});
  p.conv1_k = Tensor({1, 1, dims.p, ch});
  p.conv1_b = Tensor({ch});
  p.conv2_k = Tensor({3, 3, ch, ch});
  p.conv2_b = Tensor({ch});
  p.conv3_k = Tensor({3, 3, ch, ch});
  p.conv3_b = Tensor({ch});
  p.w_fc1 = Tensor({NetDims::kFc1Width, dims.fusion_size()});
  p.b_fc1 = Tensor({NetDims::kFc1Width});
  p.w_cls = Tensor({dims.k, NetDims::kFc1Width});
  p.b_cls = Tensor({dims.k});
  return p;
}

bool BaseNetParams::all_finite() const {
  for (const auto& ref : param_refs(*this))
    if (!ref.tensor->all_finite()) return false;
  return true;
}

std::vector<ParamRef> param_refs(BaseNetParams& p) {
  return {
      {"w_spe", &p.w_spe},     {"b_spe", &p.b_spe},     {"conv1_k", &p.conv1_k},
      {"conv1_b", &p.conv1_b}, {"conv2_k", &p.conv2_k}, {"conv2_b", &p.conv2_b},
      {"conv3_k", &p.conv3_k}, {"conv3_b", &p.conv3_b}, {"w_fc1", &p.w_fc1},
      {"b_fc1", &p.b_fc1},     {"w_cls", &p.w_cls},     {"b_cls", &p.b_cls},
  };
}

std::vector<ParamRef> param_refs(const BaseNetParams& p) {
  return param_refs(const_cast<BaseNetParams&>(p));
}

BaseNetParams init_params(std::uint64_t seed, NetDims dims) {
  BaseNetParams p = BaseNetParams::zeros(dims);
  auto refs = param_refs(p);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    Tensor& t = *refs[i].tensor;
    const bool is_bias = t.rank() == 1;
    if (is_bias) continue;  // biases stay zero
    // fan_in: last-but-one extent for fc (cols), k*k*Cin for conv kernels
    double fan_in;
    if (t.rank() == 2)
      fan_in = t.dim(1);
    else
      fan_in = static_cast<double>(t.dim(0)) * t.dim(1) * t.dim(2);
    const double std_dev = std::sqrt(2.0 / fan_in);
    RngStream stream(stream_key(seed, /*tag=*/0x494e4954ULL, i));
    for (int j = 0; j < t.size(); ++j) t[j] = std_dev * stream.normal();
  }
  return p;
}

ForwardTrace forward(const BaseNetParams& params, const Eigen::VectorXd& spectral,
                     const Tensor& patch) {
  const NetDims d = params.dims;
  require_shape(static_cast<int>(spectral.size()) == d.n,
                "forward: spectral length " + std::to_string(spectral.size()) + " but n = " +
                    std::to_string(d.n));
  require_shape(patch.rank() == 3 && patch.dim(0) == d.w && patch.dim(1) == d.w &&
                    patch.dim(2) == d.p,
                "forward: patch shape " + shape_str(patch.shape) + " but expected [" +
                    std::to_string(d.w) + "x" + std::to_string(d.w) + "x" + std::to_string(d.p) +
                    "]");

  ForwardTrace tr;
  tr.dims = d;
  GradientTape& tape = tr.tape;
  for (const auto& ref : param_refs(params)) tr.param_nodes.push_back(tape.leaf(*ref.tensor));
  const auto W_SPE = tr.param_nodes[0], B_SPE = tr.param_nodes[1];
  const auto C1K = tr.param_nodes[2], C1B = tr.param_nodes[3];
  const auto C2K = tr.param_nodes[4], C2B = tr.param_nodes[5];
  const auto C3K = tr.param_nodes[6], C3B = tr.param_nodes[7];
  const auto W_FC1 = tr.param_nodes[8], B_FC1 = tr.param_nodes[9];
  const auto W_CLS = tr.param_nodes[10], B_CLS = tr.param_nodes[11];

  tr.spectral_in = tape.leaf(Tensor::from_vector(spectral));
  tr.patch_in = tape.leaf(patch);

  tr.h_spe = tape.relu(tape.fc(tr.spectral_in, W_SPE, B_SPE));
  tr.h_conv1 = tape.conv2d_same(tr.patch_in, C1K, C1B);
  tr.h_conv2 = tape.conv2d_same(tr.h_conv1, C2K, C2B);
  tr.h_pool1 = tape.avgpool2x2(tape.relu(tape.add(tr.h_conv1, tr.h_conv2)));
  tr.h_conv3 = tape.conv2d_same(tr.h_pool1, C3K, C3B);
  tr.h_pool2 = tape.avgpool2x2(tape.relu(tape.add(tr.h_pool1, tr.h_conv3)));
  tr.h_spa = tape.flatten(tr.h_pool2);
  tr.h_fusion = tape.concat(tr.h_spe, tr.h_spa);
  tr.fc1_out = tape.relu(tape.fc(tr.h_fusion, W_FC1, B_FC1));
  tr.logits = tape.fc(tr.fc1_out, W_CLS, B_CLS);
  tr.probs_node = tape.softmax(tr.logits);
  tr.probs = tape.value(tr.probs_node).values;
  return tr;
}

Eigen::VectorXd forward_probs(const BaseNetParams& params, const Eigen::VectorXd& spectral,
                              const Tensor& patch) {
  using namespace ops;
  const NetDims d = params.dims;
  require_shape(static_cast<int>(spectral.size()) == d.n, "forward_probs: bad spectral length");
  require_shape(patch.rank() == 3 && patch.dim(0) == d.w && patch.dim(1) == d.w &&
                    patch.dim(2) == d.p,
                "forward_probs: bad patch shape " + shape_str(patch.shape));

  Eigen::VectorXd h_spe =
      (mat_view(params.w_spe) * spectral + params.b_spe.values).cwiseMax(0.0);
  Tensor c1 = conv2d_same(patch, params.conv1_k, params.conv1_b.values);
  Tensor c2 = conv2d_same(c1, params.conv2_k, params.conv2_b.values);
  Tensor p1 = avgpool2x2(relu(add(c1, c2)));
  Tensor c3 = conv2d_same(p1, params.conv3_k, params.conv3_b.values);
  Tensor p2 = avgpool2x2(relu(add(p1, c3)));
  Eigen::VectorXd fusion = concat(h_spe, flatten(p2));
  Eigen::VectorXd f1 = (mat_view(params.w_fc1) * fusion + params.b_fc1.values).cwiseMax(0.0);
  Eigen::VectorXd logits = mat_view(params.w_cls) * f1 + params.b_cls.values;
  return softmax(logits);
}

double supervised_loss(const Eigen::VectorXd& probs, int label) {
  if (label < 1 || label > static_cast<int>(probs.size()))
    throw ParamError("supervised_loss: label " + std::to_string(label) + " out of range 1.." +
                     std::to_string(probs.size()));
  return ops::cross_entropy(probs, label);
}

void accumulate_gradients(BaseNetParams& grads, const ForwardTrace& trace, double scale) {
  auto refs = param_refs(grads);
  for (std::size_t i = 0; i < refs.size(); ++i)
    refs[i].tensor->values += scale * trace.tape.grad(trace.param_nodes[i]).values;
}

BaseNetParams param_gradients_supervised(ForwardTrace& trace, int label, double seed) {
  const int k = static_cast<int>(trace.probs.size());
  if (label < 1 || label > k) throw ParamError("param_gradients_supervised: label out of range");
  trace.loss_node = trace.tape.softmax_cross_entropy(trace.logits, label);
  trace.tape.backward(trace.loss_node, Tensor({1}, Eigen::VectorXd::Constant(1, seed)));
  BaseNetParams grads = BaseNetParams::zeros(trace.dims);
  accumulate_gradients(grads, trace, 1.0);
  return grads;
}

BaseNetParams param_gradients_from_probs(ForwardTrace& trace, const Eigen::VectorXd& dprobs) {
  trace.tape.backward(trace.probs_node, Tensor::from_vector(dprobs));
  BaseNetParams grads = BaseNetParams::zeros(trace.dims);
  accumulate_gradients(grads, trace, 1.0);
  return grads;
}

void axpy_params(BaseNetParams& a, const BaseNetParams& b, double scale) {
  auto ra = param_refs(a);
  auto rb = param_refs(b);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    require_shape(ra[i].tensor->shape == rb[i].tensor->shape,
                  std::string("axpy_params: shape mismatch on ") + ra[i].name);
    ra[i].tensor->values += scale * rb[i].tensor->values;
  }
}

// ---- checkpoint io ---------------------------------------------------------

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("checkpoint: truncated while reading " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_params(std::ostream& os, const BaseNetParams& p) {
  for (const auto& ref : param_refs(p)) {
    const Tensor& t = *ref.tensor;
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
}

void read_params(std::istream& is, BaseNetParams& p) {
  for (auto& ref : param_refs(p)) {
    Tensor& t = *ref.tensor;
    const std::uint32_t rank = read_u32(is, std::string(ref.name) + " rank");
    if (rank != static_cast<std::uint32_t>(t.rank()))
      throw FormatError(std::string("checkpoint: rank mismatch for ") + ref.name);
    for (int d = 0; d < t.rank(); ++d) {
      const std::uint32_t extent = read_u32(is, std::string(ref.name) + " shape");
      if (extent != static_cast<std::uint32_t>(t.dim(d)))
        throw FormatError(std::string("checkpoint: shape mismatch for ") + ref.name +
                          ": stored extent " + std::to_string(extent) + " vs expected " +
                          std::to_string(t.dim(d)));
    }
    if (!is.read(reinterpret_cast<char*>(t.values.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double))))
      throw FormatError(std::string("checkpoint: truncated payload in ") + ref.name);
  }
}

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const BaseNetParams& student,
                     const BaseNetParams& teacher) {
  if (!(student.dims == teacher.dims))
    throw ParamError("save_checkpoint: student/teacher dims differ");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("save_checkpoint: cannot open " + path);
  os.write("RSEN", 4);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<std::uint32_t>(student.dims.n));
  write_u32(os, static_cast<std::uint32_t>(student.dims.p));
  write_u32(os, static_cast<std::uint32_t>(student.dims.w));
  write_u32(os, static_cast<std::uint32_t>(student.dims.k));
  write_params(os, student);
  write_params(os, teacher);
  if (!os) throw FormatError("save_checkpoint: write failed on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("load_checkpoint: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "RSEN", 4) != 0)
    throw FormatError("load_checkpoint: bad magic in " + path);
  const std::uint32_t version = read_u32(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError("load_checkpoint: unsupported version " + std::to_string(version));
  NetDims dims;
  dims.n = static_cast<int>(read_u32(is, "n"));
  dims.p = static_cast<int>(read_u32(is, "p"));
  dims.w = static_cast<int>(read_u32(is, "w"));
  dims.k = static_cast<int>(read_u32(is, "k"));
  Checkpoint ck{BaseNetParams::zeros(dims), BaseNetParams::zeros(dims)};
  read_params(is, ck.student);
  read_params(is, ck.teacher);
  return ck;
}

}  // namespace rsen
