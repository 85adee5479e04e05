#pragma once

#include <cstdint>
#include <string_view>

#include "spider/numerics/tensor.hpp"
#include "spider/templ/messages.hpp"

namespace spider::pipeline {

using numerics::Tensor;
using templ::Modality;

/// Frozen stand-ins for the text encoder, the input-side modality encoder
/// with its projector, and the LLM's M-Prompt hidden state.
///
/// Feature rows are derived on demand from the seed and the feature hash, so
/// an instance is immutable and safe to share across threads.
class MockEncoders {
 public:
  MockEncoders(std::uint64_t seed, std::size_t d, std::size_t d_c);

  [[nodiscard]] std::size_t d() const noexcept { return d_; }
  [[nodiscard]] std::size_t d_c() const noexcept { return d_c_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  /// T_e: unigram and bigram features of the whitespace tokens, projected to
  /// D_c and L2-normalized. Throws std::invalid_argument for blank input.
  [[nodiscard]] Tensor encode_text(std::string_view text) const;

  /// E: projection of the hashed asset reference plus a modality feature,
  /// L2-normalized to D.
  [[nodiscard]] Tensor encode_modality(std::string_view asset_ref, Modality m) const;

  /// Context vector followed by the target modality one-hot, mapped through G,
  /// normalized and replicated to `rows` rows.
  [[nodiscard]] Tensor hidden_from_context(const Tensor& context, Modality target, std::size_t rows) const;

  /// D-dim lift of a text encoding, used as context when the question carries
  /// no input asset.
  [[nodiscard]] Tensor lift_text(const Tensor& t_e) const;

  /// M_e for one answer group: context is E of the input asset when present,
  /// otherwise lift_text(encode_text(instruction)).
  [[nodiscard]] Tensor mock_llm_hidden(const templ::QuestionMessage& q, const templ::ModalityGroup& group,
                                       std::size_t rows) const;

 private:
  void add_feature_row(std::string_view domain, std::string_view feature, std::span<double> acc) const;

  std::uint64_t seed_;
  std::size_t d_, d_c_;
  Tensor lift_;  // D_c x D
  Tensor g_;     // (D + modalities) x D
};

}  // namespace spider::pipeline
