#pragma once

// Synthetic domain-shift problems and CSV ingestion.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cdan/tensor.hpp"

namespace cdan {

enum class Domain { Source, Target };

// Labeled examples. For the target domain the labels exist for evaluation
// only; training code receives an UnlabeledView instead.
class LabeledSet {
 public:
  LabeledSet() = default;
  LabeledSet(Tensor x, std::vector<int> y, std::size_t classes, Domain domain);

  const Tensor& x() const noexcept { return x_; }
  const std::vector<int>& labels() const noexcept { return y_; }
  std::size_t classes() const noexcept { return classes_; }
  Domain domain() const noexcept { return domain_; }
  std::size_t size() const noexcept { return y_.size(); }
  std::size_t dim() const noexcept { return x_.cols(); }

 private:
  Tensor x_;
  std::vector<int> y_;
  std::size_t classes_ = 0;
  Domain domain_ = Domain::Source;
};

// Features of a domain with its labels stripped.
class UnlabeledView {
 public:
  explicit UnlabeledView(const LabeledSet& set) : x_(&set.x()) {}
  const Tensor& x() const noexcept { return *x_; }
  std::size_t size() const noexcept { return x_->rows(); }

 private:
  const Tensor* x_;
};

enum class Generator { RotatedBlobs, TwinMoonsShift };

struct ShiftSpec {
  Generator generator = Generator::RotatedBlobs;
  std::size_t classes = 3;
  std::size_t dim = 2;
  // Blob centres sit on a circle of this radius.
  double radius = 4.0;
  double noise = 0.5;
  // Global rotation of the target domain, degrees.
  double rotation_deg = 100.0;
  // Extra per-class target rotation, degrees; empty or one entry per class.
  std::vector<double> class_rotation_deg;
  double translate_x = 0.0;
  double translate_y = 0.0;
  std::size_t n_source = 600;
  std::size_t n_target = 600;
  std::uint64_t seed = 0;

  void validate() const;
};

// Defaults per generator: blobs use the values above, moons use two classes,
// noise 0.1 and a 30 degree rotation.
ShiftSpec default_spec(Generator g);

std::pair<LabeledSet, LabeledSet> make_rotated_blobs(const ShiftSpec& spec);
std::pair<LabeledSet, LabeledSet> make_twin_moons_shift(const ShiftSpec& spec);
std::pair<LabeledSet, LabeledSet> make_shift(const ShiftSpec& spec);

// Rows are feature columns followed by an integer label; an optional header
// row is skipped. `classes` = 0 infers max label + 1.
LabeledSet load_csv(const std::string& path, Domain domain, std::size_t classes = 0);
void write_csv(const LabeledSet& set, const std::string& path);

// Shuffled index batches; the order is a pure function of (seed, epoch). The
// final short batch is kept.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch);

}  // namespace cdan
