#include "vitality/opcount.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace vitality::opcount {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("operation count overflow");
  return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("operation count overflow");
  return r;
}

std::uint64_t mul3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return checked_mul(checked_mul(a, b), c);
}

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

void AttentionDims::validate() const {
  if (n < 1 || d < 1 || h < 1 || layers < 1) {
    throw std::invalid_argument("attention dims must all be >= 1 (n=" + std::to_string(n) +
                                ", d=" + std::to_string(d) + ", h=" + std::to_string(h) +
                                ", layers=" + std::to_string(layers) + ")");
  }
}

OpCounts& OpCounts::operator+=(const OpCounts& o) {
  mul = checked_add(mul, o.mul);
  add = checked_add(add, o.add);
  div = checked_add(div, o.div);
  exp = checked_add(exp, o.exp);
  return *this;
}

AttentionDims Stage::vanilla_dims() const {
  AttentionDims v = dims;
  if (vanilla_tokens) v.n = *vanilla_tokens;
  return v;
}

void StagedModel::validate() const {
  if (stages.empty()) throw std::invalid_argument("model '" + name + "' has no stages");
  for (const auto& s : stages) {
    s.dims.validate();
    s.vanilla_dims().validate();
  }
}

OpCounts count_vanilla(const AttentionDims& dims) {
  dims.validate();
  const auto reps = checked_mul(dims.h, dims.layers);
  const auto n2 = checked_mul(dims.n, dims.n);
  const auto mul_head = mul3(2, n2, dims.d);
  OpCounts c;
  c.mul = checked_mul(mul_head, reps);
  c.add = checked_mul(checked_add(mul_head, n2), reps);
  c.div = checked_mul(n2, reps);
  c.exp = c.div;
  return c;
}

OpCounts count_taylor(const AttentionDims& dims) {
  dims.validate();
  const auto reps = checked_mul(dims.h, dims.layers);
  const auto nd = checked_mul(dims.n, dims.d);
  const auto two_nd2 = mul3(2, nd, dims.d);
  OpCounts c;
  c.mul = checked_mul(checked_add(two_nd2, nd), reps);
  c.add = checked_mul(checked_add(two_nd2, checked_mul(7, nd)), reps);
  c.div = checked_mul(checked_add(nd, dims.d), reps);
  c.exp = 0;
  return c;
}

Ratios ratio_formulas(std::uint64_t n, std::uint64_t d) {
  const double nf = static_cast<double>(n);
  const double df = static_cast<double>(d);
  return {2.0 * nf / (2.0 * df + 1.0), (2.0 * df + 1.0) * nf / ((2.0 * df + 7.0) * df),
          nf * nf / ((nf + 1.0) * df)};
}

std::vector<ModelRow> model_table(const std::vector<StagedModel>& models) {
  std::vector<ModelRow> rows;
  rows.reserve(models.size());
  for (const auto& m : models) {
    m.validate();
    ModelRow row;
    row.name = m.name;
    for (const auto& s : m.stages) {
      row.taylor += count_taylor(s.dims);
      row.vanilla += count_vanilla(s.vanilla_dims());
    }
    row.ratios.r_mul = static_cast<double>(row.vanilla.mul) / static_cast<double>(row.taylor.mul);
    row.ratios.r_add = static_cast<double>(row.vanilla.add) / static_cast<double>(row.taylor.add);
    row.ratios.r_div = static_cast<double>(row.vanilla.div) / static_cast<double>(row.taylor.div);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_millions(std::uint64_t count) {
  return fixed1(static_cast<double>(count) / 1e6);
}

std::string format_ratio(double ratio) { return "(" + fixed1(ratio) + "×)"; }

std::string render_table_text(const std::vector<ModelRow>& rows) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s | %8s %8s %8s || %8s %8s %8s %8s %6s %8s %8s\n",
                "MODELS", "Mul.", "Add.", "Div.", "Mul.", "", "Add.", "", "Exp.", "Div.", "");
  os << "                 | Taylor attention           || Baseline (vanilla softmax)\n" << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s | %8s %8s %8s || %8s %8s %8s %8s %6s %8s %8s\n",
                  r.name.c_str(), format_millions(r.taylor.mul).c_str(),
                  format_millions(r.taylor.add).c_str(), format_millions(r.taylor.div).c_str(),
                  format_millions(r.vanilla.mul).c_str(), format_ratio(r.ratios.r_mul).c_str(),
                  format_millions(r.vanilla.add).c_str(), format_ratio(r.ratios.r_add).c_str(),
                  format_millions(r.vanilla.exp).c_str(), format_millions(r.vanilla.div).c_str(),
                  format_ratio(r.ratios.r_div).c_str());
    os << line;
  }
  os << "(counts in millions; ratios are baseline / Taylor)\n";
  return os.str();
}

std::string render_table_csv(const std::vector<ModelRow>& rows) {
  std::ostringstream os;
  os << "model,taylor_mul,taylor_add,taylor_div,taylor_exp,vanilla_mul,ratio_mul,vanilla_add,"
        "ratio_add,vanilla_exp,vanilla_div,ratio_div\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.name << ',' << r.taylor.mul << ',' << r.taylor.add << ',' << r.taylor.div << ','
       << r.taylor.exp << ',' << r.vanilla.mul << ',' << r.ratios.r_mul << ',' << r.vanilla.add
       << ',' << r.ratios.r_add << ',' << r.vanilla.exp << ',' << r.vanilla.div << ','
       << r.ratios.r_div << '\n';
  }
  return os.str();
}

}  // namespace vitality::opcount
