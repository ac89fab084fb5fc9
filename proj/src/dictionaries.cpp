#include "psearch/dictionaries.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "psearch/error.hpp"
#include "psearch/textio.hpp"

namespace psearch {

namespace {

constexpr const char* kMagic = "PSDICT1";

void write_values(std::ostream& out, std::span<const double> v) {
  for (double x : v) out << ' ' << textio::exact(x);
}

Vec read_values(std::istringstream& fields, std::size_t dim) {
  Vec v(dim);
  std::string tok;
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(fields >> tok)) throw Error(Errc::kFormatError, "truncated vector");
    v[i] = textio::parse_double(tok);
  }
  if (fields >> tok) throw Error(Errc::kFormatError, "trailing data after vector");
  return v;
}

void expect_magic(std::istream& in, std::string_view kind) {
  std::string line;
  if (!std::getline(in, line) || textio::trim(line) != kMagic) {
    throw Error(Errc::kFormatError, "missing PSDICT1 header");
  }
  if (textio::expect_key(in, "kind") != kind) {
    throw Error(Errc::kFormatError, "snapshot is not of kind '" + std::string(kind) + "'");
  }
}

}  // namespace

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::kInvalidParams, what); };
  if (!(alpha >= 0)) fail("alpha must be >= 0");
  if (!(beta >= 0)) fail("beta must be >= 0");
  if (!(lambda > 0)) fail("lambda must be > 0");
  if (!(phi > 0 && phi < 1)) fail("phi must lie in (0, 1)");
  if (pool_size < 1) fail("pool size T must be >= 1");
  if (top_negatives < 0) fail("top negative count r must be >= 0");
  if (k_cap && *k_cap == 0) fail("k_cap must be positive when set");
  if (!(triplet_margin >= 0)) fail("triplet margin must be >= 0");
  if (!(contrastive_margin >= 0 && contrastive_margin <= 1)) {
    fail("contrastive margin must lie in [0, 1]");
  }
}

FeatureDictionary::FeatureDictionary(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(Errc::kInvalidParams, "dictionary capacity must be positive");
}

void FeatureDictionary::push(Embedding feature, Label label) {
  if (label < kUnlabeled) {
    throw Error(Errc::kInvalidLabel, "label " + std::to_string(label) + " cannot be stored");
  }
  if (feature.dim() == 0) throw Error(Errc::kZeroVector, "empty feature");
  if (!entries_.empty() && entries_.front().feature.dim() != feature.dim()) {
    throw Error(Errc::kDimensionMismatch, "feature dimension differs from stored entries");
  }
  entries_.push_back({std::move(feature), label, next_index_++});
  while (entries_.size() > capacity_) entries_.pop_front();
}

std::vector<const DictionaryEntry*> FeatureDictionary::negatives(
    Label anchor_label, std::optional<std::size_t> k_cap) const {
  std::vector<const DictionaryEntry*> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.label == kUnlabeled || e.label != anchor_label) out.push_back(&e);
  }
  if (k_cap && out.size() > *k_cap) out.erase(out.begin(), out.end() - *k_cap);
  return out;
}

void FeatureDictionary::write_snapshot(std::ostream& out) const {
  out << kMagic << '\n'
      << "kind feature\n"
      << "capacity " << capacity_ << '\n'
      << "dim " << (entries_.empty() ? 0 : entries_.front().feature.dim()) << '\n'
      << "next_index " << next_index_ << '\n'
      << "count " << entries_.size() << '\n';
  for (const auto& e : entries_) {
    out << "entry " << e.insertion_index << ' ' << e.label;
    write_values(out, e.feature.values());
    out << '\n';
  }
}

FeatureDictionary FeatureDictionary::read_snapshot(std::istream& in) {
  expect_magic(in, "feature");
  FeatureDictionary dict(textio::parse_int(textio::expect_key(in, "capacity")));
  const auto dim = static_cast<std::size_t>(textio::parse_int(textio::expect_key(in, "dim")));
  const auto next = textio::parse_int(textio::expect_key(in, "next_index"));
  const auto count = textio::parse_int(textio::expect_key(in, "count"));
  if (count < 0 || static_cast<std::size_t>(count) > dict.capacity_) {
    throw Error(Errc::kFormatError, "entry count exceeds capacity");
  }
  for (long long i = 0; i < count; ++i) {
    std::istringstream fields(textio::expect_key(in, "entry"));
    std::string idx, label;
    fields >> idx >> label;
    DictionaryEntry e;
    e.insertion_index = static_cast<std::uint64_t>(textio::parse_int(idx));
    e.label = static_cast<Label>(textio::parse_int(label));
    if (e.label < kUnlabeled) throw Error(Errc::kInvalidLabel, "stored label below -1");
    if (!dict.entries_.empty() && e.insertion_index <= dict.entries_.back().insertion_index) {
      throw Error(Errc::kFormatError, "entries not ordered by insertion index");
    }
    e.feature = Embedding::from_unit(read_values(fields, dim), 1e-9);
    dict.entries_.push_back(std::move(e));
  }
  dict.next_index_ = static_cast<std::uint64_t>(next);
  if (!dict.entries_.empty() && dict.entries_.back().insertion_index >= dict.next_index_) {
    throw Error(Errc::kFormatError, "next_index not beyond stored entries");
  }
  return dict;
}

ClassCenterTable::ClassCenterTable(int num_classes, double phi)
    : phi_(phi), centers_(num_classes > 0 ? num_classes : 0) {
  if (num_classes < 1) throw Error(Errc::kInvalidParams, "need at least one class");
  if (!(phi > 0 && phi < 1)) throw Error(Errc::kInvalidParams, "phi must lie in (0, 1)");
}

void ClassCenterTable::check_label(Label label) const {
  if (label < 0 || label >= num_classes()) {
    throw Error(Errc::kInvalidLabel,
                "label " + std::to_string(label) + " outside [0, " +
                    std::to_string(num_classes()) + ")");
  }
}

CenterUpdate ClassCenterTable::update(Label label, const Embedding& x) {
  check_label(label);
  auto& slot = centers_[label];
  if (!slot) {
    slot = x;
    ++observed_;
    return CenterUpdate::kInitialized;
  }
  if (slot->dim() != x.dim()) throw Error(Errc::kDimensionMismatch, "center dimension");
  Vec raw(x.dim());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = phi_ * (*slot)[i] + (1 - phi_) * x[i];
  if (norm2(raw) < kZeroNorm) return CenterUpdate::kDegenerate;
  slot = Embedding::normalized(raw);
  return CenterUpdate::kUpdated;
}

bool ClassCenterTable::has(Label label) const {
  return label >= 0 && label < num_classes() && centers_[label].has_value();
}

const Embedding& ClassCenterTable::center(Label label) const {
  check_label(label);
  if (!centers_[label]) {
    throw Error(Errc::kUninitializedCenter, "class " + std::to_string(label) + " has no center");
  }
  return *centers_[label];
}

void ClassCenterTable::write_snapshot(std::ostream& out) const {
  std::size_t dim = 0;
  for (const auto& c : centers_) {
    if (c) {
      dim = c->dim();
      break;
    }
  }
  out << kMagic << '\n'
      << "kind centers\n"
      << "num_classes " << centers_.size() << '\n'
      << "phi " << textio::exact(phi_) << '\n'
      << "dim " << dim << '\n'
      << "count " << observed_ << '\n';
  for (std::size_t j = 0; j < centers_.size(); ++j) {
    if (!centers_[j]) continue;
    out << "center " << j;
    write_values(out, centers_[j]->values());
    out << '\n';
  }
}

ClassCenterTable ClassCenterTable::read_snapshot(std::istream& in) {
  expect_magic(in, "centers");
  const auto classes = static_cast<int>(textio::parse_int(textio::expect_key(in, "num_classes")));
  const double phi = textio::parse_double(textio::expect_key(in, "phi"));
  ClassCenterTable table(classes, phi);
  const auto dim = static_cast<std::size_t>(textio::parse_int(textio::expect_key(in, "dim")));
  const auto count = textio::parse_int(textio::expect_key(in, "count"));
  for (long long i = 0; i < count; ++i) {
    std::istringstream fields(textio::expect_key(in, "center"));
    std::string label;
    fields >> label;
    const auto j = static_cast<Label>(textio::parse_int(label));
    table.check_label(j);
    if (table.centers_[j]) throw Error(Errc::kFormatError, "duplicate center");
    table.centers_[j] = Embedding::from_unit(read_values(fields, dim), 1e-9);
    ++table.observed_;
  }
  return table;
}

}  // namespace psearch
