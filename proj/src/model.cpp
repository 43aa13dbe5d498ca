#include "tfc/model.hpp"

#include <cmath>

#include "tfc/errors.hpp"
#include "tfc/fft.hpp"

namespace tfc::nn {

std::string to_string(Branches b) {
  switch (b) {
    case Branches::both: return "both";
    case Branches::time_only: return "time";
    case Branches::freq_only: return "freq";
  }
  return "?";
}

Branches parse_branches(const std::string& s) {
  if (s == "both") return Branches::both;
  if (s == "time") return Branches::time_only;
  if (s == "freq") return Branches::freq_only;
  throw ConfigError("unknown embedding branches '" + s + "' (expected both, time, freq)");
}

std::size_t ArchConfig::fused_dim() const noexcept {
  const std::size_t per_channel = branches == Branches::both ? 2 * kProjectionDim
                                                             : kProjectionDim;
  return per_channel * channels;
}

std::size_t encoder_output_length(std::size_t input_length) {
  if (input_length < kMinInputLength) {
    throw ShapeError("input length " + std::to_string(input_length) +
                     " is below the encoder minimum of " + std::to_string(kMinInputLength) +
                     "; zero-pad the dataset first");
  }
  std::size_t len = input_length;
  for (std::size_t stride : kStrides) {
    len = (std::max(len + 2 * kPadding, kKernel) - kKernel) / stride + 1;
    len = (len - kPool) / kPool + 1;
  }
  return len;
}

std::size_t encoder_flat_dim(std::size_t input_length) {
  return encoder_output_length(input_length) * kDepths[2];
}

std::vector<double> amplitude_input(std::span<const double> signal) {
  return full_amplitude(forward_fft(signal));
}

// ------------------------------------------------------------------ building

namespace {

NumArray glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  NumArray out(std::move(shape));
  for (double& v : out.data()) v = rng.uniform(-limit, limit);
  return out;
}

void add_conv(ad::ParamStore& store, const std::string& name, std::size_t kernel,
              std::size_t cin, std::size_t cout, SeededRng& rng) {
  store.add(name + ".weight", glorot({kernel, cin, cout}, cin * kernel, cout * kernel, rng));
  store.add(name + ".bias", NumArray(Shape{cout}));
}

void add_dense(ad::ParamStore& store, const std::string& name, std::size_t din,
               std::size_t dout, SeededRng& rng) {
  store.add(name + ".weight", glorot({din, dout}, din, dout, rng));
  store.add(name + ".bias", NumArray(Shape{dout}));
}

void add_encoder(ad::ParamStore& store, const std::string& prefix, bool residual,
                 SeededRng& rng) {
  add_conv(store, prefix + ".conv1", kKernel, 1, kDepths[0], rng);
  add_conv(store, prefix + ".conv2", kKernel, kDepths[0], kDepths[1], rng);
  add_conv(store, prefix + ".conv3", kKernel, kDepths[1], kDepths[2], rng);
  if (residual) {
    add_conv(store, prefix + ".skip2", 1, kDepths[0], kDepths[1], rng);
    add_conv(store, prefix + ".skip3", 1, kDepths[1], kDepths[2], rng);
  }
}

void add_projector(ad::ParamStore& store, const std::string& prefix, std::size_t flat,
                   SeededRng& rng) {
  add_dense(store, prefix + ".fc1", flat, kProjectorHidden, rng);
  add_dense(store, prefix + ".fc2", kProjectorHidden, kProjectionDim, rng);
}

// Expected (name, shape) pairs for an architecture, in creation order.
std::vector<std::pair<std::string, Shape>> expected_layout(const ArchConfig& arch,
                                                           std::size_t num_classes) {
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t flat = encoder_flat_dim(arch.input_length);
  for (const char* enc : {"g_t", "g_f"}) {
    const std::string p = enc;
    out.push_back({p + ".conv1.weight", {kKernel, 1, kDepths[0]}});
    out.push_back({p + ".conv1.bias", {kDepths[0]}});
    out.push_back({p + ".conv2.weight", {kKernel, kDepths[0], kDepths[1]}});
    out.push_back({p + ".conv2.bias", {kDepths[1]}});
    out.push_back({p + ".conv3.weight", {kKernel, kDepths[1], kDepths[2]}});
    out.push_back({p + ".conv3.bias", {kDepths[2]}});
    if (arch.residual) {
      out.push_back({p + ".skip2.weight", {1, kDepths[0], kDepths[1]}});
      out.push_back({p + ".skip2.bias", {kDepths[1]}});
      out.push_back({p + ".skip3.weight", {1, kDepths[1], kDepths[2]}});
      out.push_back({p + ".skip3.bias", {kDepths[2]}});
    }
  }
  for (const char* proj : {"r_t", "r_f"}) {
    const std::string p = proj;
    out.push_back({p + ".fc1.weight", {flat, kProjectorHidden}});
    out.push_back({p + ".fc1.bias", {kProjectorHidden}});
    out.push_back({p + ".fc2.weight", {kProjectorHidden, kProjectionDim}});
    out.push_back({p + ".fc2.bias", {kProjectionDim}});
  }
  if (num_classes > 0) {
    out.push_back({"head.fc1.weight", {arch.fused_dim(), kHeadHidden}});
    out.push_back({"head.fc1.bias", {kHeadHidden}});
    out.push_back({"head.fc2.weight", {kHeadHidden, num_classes}});
    out.push_back({"head.fc2.bias", {num_classes}});
  }
  return out;
}

}  // namespace

TfcModel TfcModel::create(const ArchConfig& arch, SeededRng& rng) {
  if (arch.channels < 1) throw ConfigError("model needs at least one channel");
  const std::size_t flat = encoder_flat_dim(arch.input_length);
  ad::ParamStore store;
  add_encoder(store, "g_t", arch.residual, rng);
  add_encoder(store, "g_f", arch.residual, rng);
  add_projector(store, "r_t", flat, rng);
  add_projector(store, "r_f", flat, rng);
  return TfcModel(arch, std::move(store), 0);
}

void TfcModel::add_classifier(std::size_t num_classes, SeededRng& rng) {
  if (num_classes < 2) throw ConfigError("classifier needs at least 2 classes");
  if (has_classifier()) throw ContractError("model already has a classifier head");
  add_dense(store_, "head.fc1", arch_.fused_dim(), kHeadHidden, rng);
  add_dense(store_, "head.fc2", kHeadHidden, num_classes, rng);
  num_classes_ = num_classes;
}

TfcModel restore_model(const ArchConfig& arch, std::size_t num_classes,
                       ad::ParamStore store) {
  const auto layout = expected_layout(arch, num_classes);
  if (layout.size() != store.size()) {
    throw AlignmentError("checkpoint holds " + std::to_string(store.size()) +
                         " parameters, architecture expects " +
                         std::to_string(layout.size()));
  }
  for (const auto& [name, shape] : layout) {
    if (!store.contains(name)) throw AlignmentError("checkpoint is missing parameter " + name);
    if (store.at(name).value.shape() != shape) {
      throw AlignmentError("parameter " + name + " has shape " +
                           shape_to_string(store.at(name).value.shape()) + ", expected " +
                           shape_to_string(shape));
    }
  }
  return TfcModel(arch, std::move(store), num_classes);
}

// ------------------------------------------------------------------ forward

void TfcModel::check_input(const NumArray& x) const {
  if (x.rank() != 3 || x.dim(2) != 1) {
    throw ShapeError("encoder input must be [rows, length, 1], got " +
                     shape_to_string(x.shape()));
  }
  if (x.dim(1) < kMinInputLength) {
    throw ShapeError("input length " + std::to_string(x.dim(1)) +
                     " is below the encoder minimum of " + std::to_string(kMinInputLength));
  }
  if (x.dim(1) != arch_.input_length) {
    throw AlignmentError("model expects input length " + std::to_string(arch_.input_length) +
                         ", got " + std::to_string(x.dim(1)) +
                         "; align lengths with zero_pad/downsample first");
  }
}

EncoderPass TfcModel::forward_branch(const std::string& enc, const std::string& proj,
                                     const ad::Var& x, bool project) {
  check_input(x->value);
  auto p = [&](const std::string& name) { return ad::parameter(store_.at(name)); };
  auto block = [&](const ad::Var& in, const std::string& conv, std::size_t stride) {
    ad::Var y = ad::conv1d(in, p(enc + "." + conv + ".weight"), p(enc + "." + conv + ".bias"),
                           stride, kPadding);
    return ad::maxpool1d(ad::relu(y), kPool, kPool);
  };
  auto skip = [&](const ad::Var& in, const std::string& name) {
    return ad::conv1d(in, p(enc + "." + name + ".weight"), p(enc + "." + name + ".bias"),
                      kPool, 0);
  };

  ad::Var h1 = block(x, "conv1", kStrides[0]);
  ad::Var h2 = block(h1, "conv2", kStrides[1]);
  if (arch_.residual) h2 = ad::add(h2, skip(h1, "skip2"));
  ad::Var h3 = block(h2, "conv3", kStrides[2]);
  if (arch_.residual) h3 = ad::add(h3, skip(h2, "skip3"));

  EncoderPass pass{ad::flatten(h3), nullptr};
  if (project) {
    ad::Var hidden = ad::relu(
        ad::dense(pass.h, p(proj + ".fc1.weight"), p(proj + ".fc1.bias")));
    pass.z = ad::dense(hidden, p(proj + ".fc2.weight"), p(proj + ".fc2.bias"));
  }
  return pass;
}

EncoderPass TfcModel::forward_time(const ad::Var& x, bool project) {
  return forward_branch("g_t", "r_t", x, project);
}

EncoderPass TfcModel::forward_freq(const ad::Var& amplitudes, bool project) {
  return forward_branch("g_f", "r_f", amplitudes, project);
}

ad::Var TfcModel::forward_classifier(const ad::Var& fused) {
  if (!has_classifier()) throw ContractError("model has no classifier head");
  const NumArray& v = fused->value;
  if (v.rank() != 2 || v.dim(1) != arch_.fused_dim()) {
    throw ShapeError("classifier expects [B, " + std::to_string(arch_.fused_dim()) +
                     "], got " + shape_to_string(v.shape()));
  }
  auto p = [&](const std::string& name) { return ad::parameter(store_.at(name)); };
  ad::Var hidden = ad::relu(ad::dense(fused, p("head.fc1.weight"), p("head.fc1.bias")));
  return ad::dense(hidden, p("head.fc2.weight"), p("head.fc2.bias"));
}

namespace {

ad::Var single_row(std::span<const double> values) {
  return ad::constant(NumArray(Shape{1, values.size(), 1},
                               std::vector<double>(values.begin(), values.end())));
}

Embedding to_embedding(const EncoderPass& pass) {
  return {pass.h->value.reshaped({pass.h->value.size()}),
          pass.z->value.reshaped({pass.z->value.size()})};
}

}  // namespace

Embedding TfcModel::encode_time(std::span<const double> signal) {
  return to_embedding(forward_time(single_row(signal), true));
}

Embedding TfcModel::encode_freq(std::span<const double> amplitudes) {
  return to_embedding(forward_freq(single_row(amplitudes), true));
}

NumArray TfcModel::classify(const NumArray& fused) {
  ad::Var in = ad::constant(fused.reshaped({1, fused.size()}));
  ad::Var logits = forward_classifier(in);
  return logits->value.reshaped({logits->value.size()});
}

// -------------------------------------------------------------------- views

namespace {

void check_data(std::span<const double> data, std::size_t channels, std::size_t length,
                std::span<const std::size_t> indices) {
  const std::size_t stride = channels * length;
  for (std::size_t idx : indices) {
    if ((idx + 1) * stride > data.size()) {
      throw ShapeError("sample index " + std::to_string(idx) + " outside the data block");
    }
  }
}

}  // namespace

ViewBatch make_views(std::span<const double> data, std::size_t channels, std::size_t length,
                     std::span<const std::size_t> indices, const AugmentationBanks& banks,
                     std::uint64_t seed, std::uint64_t epoch) {
  check_data(data, channels, length, indices);
  if (banks.time.empty() || banks.freq.empty()) {
    throw ConfigError("augmentation banks must not be empty");
  }
  const std::size_t rows = indices.size() * channels;
  ViewBatch v{NumArray({rows, length, 1}), NumArray({rows, length, 1}),
              NumArray({rows, length, 1}), NumArray({rows, length, 1}), indices.size(), 0};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    SeededRng rng = SeededRng::derive(seed, epoch, indices[i]);
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t row = i * channels + c;
      const auto x = data.subspan((indices[i] * channels + c) * length, length);
      const auto& tp = banks.time[rng.below(banks.time.size())];
      const std::vector<double> xa = aug::augment_time(x, tp, rng);
      const Spectrum spec = forward_fft(x);
      const auto& fp = banks.freq[rng.below(banks.freq.size())];
      const aug::FreqAugResult fa = aug::augment_freq(spec, fp, rng);
      if (fa.warning) ++v.aug_warnings;
      const std::vector<double> f = full_amplitude(spec);
      const std::vector<double> fa_amp = full_amplitude(fa.spectrum);
      std::copy(x.begin(), x.end(), v.time.ptr() + row * length);
      std::copy(xa.begin(), xa.end(), v.time_aug.ptr() + row * length);
      std::copy(f.begin(), f.end(), v.freq.ptr() + row * length);
      std::copy(fa_amp.begin(), fa_amp.end(), v.freq_aug.ptr() + row * length);
    }
  }
  return v;
}

ViewBatch make_plain_views(std::span<const double> data, std::size_t channels,
                           std::size_t length, std::span<const std::size_t> indices) {
  check_data(data, channels, length, indices);
  const std::size_t rows = indices.size() * channels;
  ViewBatch v{NumArray({rows, length, 1}), NumArray(), NumArray({rows, length, 1}),
              NumArray(), indices.size(), 0};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t row = i * channels + c;
      const auto x = data.subspan((indices[i] * channels + c) * length, length);
      const std::vector<double> f = amplitude_input(x);
      std::copy(x.begin(), x.end(), v.time.ptr() + row * length);
      std::copy(f.begin(), f.end(), v.freq.ptr() + row * length);
    }
  }
  return v;
}

BatchEmbeddings forward_views(TfcModel& model, const ViewBatch& views,
                              const ForwardNeeds& needs) {
  BatchEmbeddings out;
  const bool augmented = !views.time_aug.empty();
  if (needs.time) {
    EncoderPass a = model.forward_time(ad::constant(views.time), needs.project);
    out.h_t = a.h;
    out.z_t = a.z;
    if (augmented) {
      EncoderPass b = model.forward_time(ad::constant(views.time_aug), needs.project);
      out.h_t_aug = b.h;
      out.z_t_aug = b.z;
    }
  }
  if (needs.freq) {
    EncoderPass a = model.forward_freq(ad::constant(views.freq), needs.project);
    out.h_f = a.h;
    out.z_f = a.z;
    if (augmented) {
      EncoderPass b = model.forward_freq(ad::constant(views.freq_aug), needs.project);
      out.h_f_aug = b.h;
      out.z_f_aug = b.z;
    }
  }
  return out;
}

ad::Var fuse(const TfcModel& model, const ad::Var& z_t, const ad::Var& z_f,
             std::size_t samples) {
  const ArchConfig& arch = model.arch();
  ad::Var per_row;
  switch (arch.branches) {
    case Branches::both: per_row = ad::concat_cols(z_t, z_f); break;
    case Branches::time_only: per_row = z_t; break;
    case Branches::freq_only: per_row = z_f; break;
  }
  if (!per_row) throw ContractError("fuse: required projection missing");
  return ad::reshape(per_row, Shape{samples, arch.fused_dim()});
}

SampleEmbedding embed_sample(TfcModel& model, std::span<const double> sample,
                             const AugmentationBanks& banks, SeededRng& rng) {
  const ArchConfig& arch = model.arch();
  if (arch.channels < 1) throw ShapeError("sample needs at least one channel");
  if (sample.size() != arch.channels * arch.input_length) {
    throw ShapeError("sample holds " + std::to_string(sample.size()) + " values, expected " +
                     std::to_string(arch.channels) + " channels x " +
                     std::to_string(arch.input_length));
  }
  SampleEmbedding out;
  const std::size_t len = arch.input_length;
  std::vector<double> fused;
  for (std::size_t c = 0; c < arch.channels; ++c) {
    const auto x = sample.subspan(c * len, len);
    const auto& tp = banks.time[rng.below(banks.time.size())];
    const std::vector<double> xa = aug::augment_time(x, tp, rng);
    const Spectrum spec = forward_fft(x);
    const auto& fp = banks.freq[rng.below(banks.freq.size())];
    const aug::FreqAugResult fa = aug::augment_freq(spec, fp, rng);
    const Embedding et = model.encode_time(x);
    const Embedding eta = model.encode_time(xa);
    const Embedding ef = model.encode_freq(full_amplitude(spec));
    const Embedding efa = model.encode_freq(full_amplitude(fa.spectrum));
    out.channels.push_back({et.h, eta.h, ef.h, efa.h, et.z, eta.z, ef.z, efa.z});
    if (arch.branches != Branches::freq_only) {
      fused.insert(fused.end(), et.z.data().begin(), et.z.data().end());
    }
    if (arch.branches != Branches::time_only) {
      fused.insert(fused.end(), ef.z.data().begin(), ef.z.data().end());
    }
  }
  const std::size_t dim = fused.size();
  out.fused = NumArray(Shape{dim}, std::move(fused));
  return out;
}

}  // namespace tfc::nn
