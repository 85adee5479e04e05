#include "spider/pipeline/encoders.hpp"

#include <cctype>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spider/numerics/random.hpp"

namespace spider::pipeline {

using numerics::Rng;

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

Tensor gaussian(Rng rng, std::size_t rows, std::size_t cols, double sd) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.normal(0.0, sd);
  return t;
}

}  // namespace

MockEncoders::MockEncoders(std::uint64_t seed, std::size_t d, std::size_t d_c) : seed_(seed), d_(d), d_c_(d_c) {
  if (d < 1 || d_c < 1) throw std::invalid_argument("encoder dimensions must be >= 1");
  const Rng root(seed);
  lift_ = gaussian(root.substream("encoders.lift"), d_c, d, 1.0 / std::sqrt(static_cast<double>(d_c)));
  g_ = gaussian(root.substream("encoders.g"), d + templ::kModalityCount, d,
                1.0 / std::sqrt(static_cast<double>(d + templ::kModalityCount)));
}

void MockEncoders::add_feature_row(std::string_view domain, std::string_view feature, std::span<double> acc) const {
  std::string key(domain);
  key.push_back('\x1f');
  key.append(feature);
  Rng rng(seed_ ^ numerics::fnv1a(key));
  for (double& v : acc) v += rng.normal();
}

Tensor MockEncoders::encode_text(std::string_view text) const {
  const auto tokens = split_ws(text);
  if (tokens.empty()) throw std::invalid_argument("encode_text needs a non-blank string");
  Tensor out(1, d_c_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature_row("text.uni", tokens[i], out.data());
    if (i + 1 < tokens.size()) {
      std::string bigram(tokens[i]);
      bigram.push_back(' ');
      bigram.append(tokens[i + 1]);
      add_feature_row("text.bi", bigram, out.data());
    }
  }
  return numerics::normalized(out);
}

Tensor MockEncoders::encode_modality(std::string_view asset_ref, Modality m) const {
  Tensor out(1, d_);
  add_feature_row("asset", asset_ref, out.data());
  add_feature_row("modality", templ::modality_name(m), out.data());
  return numerics::normalized(out);
}

Tensor MockEncoders::lift_text(const Tensor& t_e) const {
  if (t_e.shape() != numerics::Shape{1, d_c_}) throw numerics::ShapeError("lift_text", {1, d_c_}, t_e.shape());
  Tensor out(1, d_);
  for (std::size_t i = 0; i < d_c_; ++i)
    for (std::size_t j = 0; j < d_; ++j) out(0, j) += t_e[i] * lift_(i, j);
  return numerics::normalized(out);
}

Tensor MockEncoders::hidden_from_context(const Tensor& context, Modality target, std::size_t rows) const {
  if (context.shape() != numerics::Shape{1, d_}) throw numerics::ShapeError("hidden context", {1, d_}, context.shape());
  if (rows < 1) throw std::invalid_argument("M_e needs at least one row");
  Tensor h(1, d_);
  for (std::size_t i = 0; i < d_; ++i)
    for (std::size_t j = 0; j < d_; ++j) h(0, j) += context[i] * g_(i, j);
  const std::size_t hot = d_ + templ::modality_index(target);
  for (std::size_t j = 0; j < d_; ++j) h(0, j) += g_(hot, j);
  const Tensor unit = numerics::normalized(h);
  Tensor out(rows, d_);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d_; ++j) out(r, j) = unit[j];
  return out;
}

Tensor MockEncoders::mock_llm_hidden(const templ::QuestionMessage& q, const templ::ModalityGroup& group,
                                     std::size_t rows) const {
  const Tensor context = q.input_asset ? encode_modality(q.input_asset->asset_ref, q.input_asset->modality)
                                       : lift_text(encode_text(q.instruction.empty() ? std::string_view("<empty>")
                                                                                     : std::string_view(q.instruction)));
  return hidden_from_context(context, group.modality, rows);
}

}  // namespace spider::pipeline
