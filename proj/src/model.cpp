#include "bae/model.hpp"

#include "bae/io_util.hpp"

#include <cstring>
#include <fstream>
#include <random>

namespace bae {

namespace {

constexpr char kCheckpointMagic[4] = {'B', 'A', 'E', '1'};

}  // namespace

void ModelDims::validate() const {
  if (d_in < 1) throw ConfigError("d_in must be >= 1");
  if (d_lat < 1) throw ConfigError("d_lat must be >= 1");
  if (d_mix) {
    if (*d_mix < 1) throw ConfigError("d_mix must be >= 1");
    if (*d_mix > d_lat) throw ConfigError("d_mix must not exceed d_lat");
  }
}

BilinearModel::BilinearModel(Variant variant, MatrixF left, MatrixF right, std::optional<MatrixF> mix)
    : variant_(variant), left_(std::move(left)), right_(std::move(right)), mix_(std::move(mix)) {
  check_invariants();
}

void BilinearModel::check_invariants() const {
  if (variant_ == Variant::topk) throw VariantError("topk models are not bilinear");
  if (left_.rows() != right_.rows() || left_.cols() != right_.cols()) {
    throw ShapeError("left and right encoders must have identical shapes");
  }
  if (has_mixer(variant_) != mix_.has_value()) {
    throw VariantError("mixer must be present exactly for mixed/combined variants (variant " +
                       to_string(variant_) + ")");
  }
  if (mix_ && mix_->cols() != left_.rows()) {
    throw ShapeError("mixer has " + std::to_string(mix_->cols()) + " columns, expected d_lat = " +
                     std::to_string(left_.rows()));
  }
}

namespace {

bool same_bits(const MatrixF& a, const MatrixF& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(float)) == 0;
}

}  // namespace

bool BilinearModel::operator==(const BilinearModel& other) const {
  if (variant_ != other.variant_ || mix_.has_value() != other.mix_.has_value()) return false;
  if (!same_bits(left_, other.left_) || !same_bits(right_, other.right_)) return false;
  return !mix_ || same_bits(*mix_, *other.mix_);
}

ModelDims BilinearModel::dims() const {
  ModelDims d{d_in(), d_lat(), std::nullopt};
  if (mix_) d.d_mix = static_cast<std::size_t>(mix_->rows());
  return d;
}

Factors BilinearModel::factors() const {
  Factors out{left_.cast<double>(), right_.cast<double>(), std::nullopt};
  if (mix_) out.mix = mix_->cast<double>();
  return out;
}

MatrixD semi_orthogonal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD out(rows, cols);
  if (cols == 0) return out;
  // Each block of `cols` consecutive rows is orthonormal; a trailing partial
  // block gets orthonormal rows as well.
  for (std::size_t start = 0; start < rows; start += cols) {
    const std::size_t block = std::min(cols, rows - start);
    MatrixD gauss(cols, block);
    for (Eigen::Index c = 0; c < gauss.cols(); ++c)
      for (Eigen::Index r = 0; r < gauss.rows(); ++r) gauss(r, c) = normal(rng);
    Eigen::HouseholderQR<MatrixD> qr(gauss);
    MatrixD q = qr.householderQ() * MatrixD::Identity(cols, block);
    const MatrixD& packed = qr.matrixQR();
    for (std::size_t k = 0; k < block; ++k) {
      if (packed(k, k) < 0) q.col(k) *= -1.0;
    }
    out.block(start, 0, block, cols) = q.transpose();
  }
  return out;
}

BilinearModel BilinearModel::orthogonal(const ModelDims& dims, Variant variant, std::uint64_t seed) {
  dims.validate();
  if (has_mixer(variant) != dims.d_mix.has_value()) {
    throw ConfigError("d_mix must be set exactly for mixed/combined variants");
  }
  std::seed_seq seq{seed, std::uint64_t{0x6ba3}};
  std::uint64_t sub[3];
  seq.generate(sub, sub + 3);
  MatrixF left = semi_orthogonal(dims.d_lat, dims.d_in, sub[0]).cast<float>();
  MatrixF right = semi_orthogonal(dims.d_lat, dims.d_in, sub[1]).cast<float>();
  std::optional<MatrixF> mix;
  if (dims.d_mix) mix = semi_orthogonal(*dims.d_mix, dims.d_lat, sub[2]).cast<float>();
  return BilinearModel(variant, std::move(left), std::move(right), std::move(mix));
}

LatentActivations encode(const Factors& factors, const MatrixD& x) {
  if (static_cast<std::size_t>(x.cols()) != factors.d_in()) {
    throw ShapeError("batch has d_in = " + std::to_string(x.cols()) + " but model expects " +
                     std::to_string(factors.d_in()));
  }
  LatentActivations out;
  out.f = (x * factors.left.transpose()).cwiseProduct(x * factors.right.transpose());
  if (factors.mix) out.g = out.f * factors.mix->transpose();
  return out;
}

LatentActivations encode(const BilinearModel& model, const MatrixD& x) { return encode(model.factors(), x); }

MatrixD latent_form(const Factors& factors, std::size_t j) {
  if (j >= factors.d_lat()) {
    throw std::out_of_range("latent index " + std::to_string(j) + " out of range (d_lat = " +
                            std::to_string(factors.d_lat()) + ")");
  }
  return factors.left.row(static_cast<Eigen::Index>(j)).transpose() *
         factors.right.row(static_cast<Eigen::Index>(j));
}

MatrixD latent_form(const BilinearModel& model, std::size_t j) {
  if (j >= model.d_lat()) {
    throw std::out_of_range("latent index " + std::to_string(j) + " out of range (d_lat = " +
                            std::to_string(model.d_lat()) + ")");
  }
  const auto row = static_cast<Eigen::Index>(j);
  return model.left().row(row).transpose().cast<double>() * model.right().row(row).cast<double>();
}

void write_checkpoint_header(std::ostream& out, const CheckpointHeader& header) {
  out.write(kCheckpointMagic, 4);
  io::write_le<std::uint32_t>(out, kCheckpointVersion);
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(header.variant));
  io::write_le<std::uint32_t>(out, header.d_in);
  io::write_le<std::uint32_t>(out, header.d_lat);
  io::write_le<std::uint32_t>(out, header.d_mix);
}

CheckpointHeader read_checkpoint_header(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError("bad checkpoint magic (expected BAE1)");
  }
  const auto version = io::read_le<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointHeader h;
  const auto tag = io::read_le<std::uint8_t>(in, "checkpoint variant");
  if (tag > static_cast<std::uint8_t>(Variant::topk)) {
    throw FormatError("unknown checkpoint variant tag " + std::to_string(tag));
  }
  h.variant = static_cast<Variant>(tag);
  h.d_in = io::read_le<std::uint32_t>(in, "checkpoint d_in");
  h.d_lat = io::read_le<std::uint32_t>(in, "checkpoint d_lat");
  h.d_mix = io::read_le<std::uint32_t>(in, "checkpoint d_mix");
  return h;
}

CheckpointHeader peek_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint_header(in);
}

void save_checkpoint(const BilinearModel& model, const std::filesystem::path& path) {
  CheckpointHeader h;
  h.variant = model.variant();
  h.d_in = static_cast<std::uint32_t>(model.d_in());
  h.d_lat = static_cast<std::uint32_t>(model.d_lat());
  h.d_mix = model.mix() ? static_cast<std::uint32_t>(model.mix()->rows()) : 0;
  io::atomic_write(
      path,
      [&](std::ostream& out) {
        write_checkpoint_header(out, h);
        io::write_f32_block(out, model.left().data(), static_cast<std::size_t>(model.left().size()));
        io::write_f32_block(out, model.right().data(), static_cast<std::size_t>(model.right().size()));
        if (model.mix()) {
          io::write_f32_block(out, model.mix()->data(), static_cast<std::size_t>(model.mix()->size()));
        }
      },
      /*binary=*/true);
}

BilinearModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const CheckpointHeader h = read_checkpoint_header(in);
  if (h.variant == Variant::topk) throw VariantError("checkpoint holds a topk model; use load_topk_checkpoint");
  if (has_mixer(h.variant) != (h.d_mix != 0)) {
    throw FormatError("checkpoint d_mix inconsistent with variant " + to_string(h.variant));
  }
  MatrixF left(h.d_lat, h.d_in);
  MatrixF right(h.d_lat, h.d_in);
  io::read_f32_block(in, left.data(), static_cast<std::size_t>(left.size()), "left encoder");
  io::read_f32_block(in, right.data(), static_cast<std::size_t>(right.size()), "right encoder");
  std::optional<MatrixF> mix;
  if (h.d_mix != 0) {
    mix = MatrixF(h.d_mix, h.d_lat);
    io::read_f32_block(in, mix->data(), static_cast<std::size_t>(mix->size()), "mixer");
  }
  return BilinearModel(h.variant, std::move(left), std::move(right), std::move(mix));
}

}  // namespace bae
