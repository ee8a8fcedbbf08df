#include "mbi/golden_trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "mbi/csv.hpp"
#include "mbi/error.hpp"
#include "mbi/text.hpp"

namespace mbi {

std::vector<GoldenStep> read_golden_trace(const std::filesystem::path& path) {
  const auto csv = read_csv(path);
  const auto ci = csv.column("image"), cg = csv.column("glimpse"), cx = csv.column("loc_x"), cy = csv.column("loc_y"),
             nx = csv.column("next_x"), ny = csv.column("next_y"), cp = csv.column("pred");
  std::vector<std::size_t> hidden_cols, logit_cols;
  for (std::size_t i = 0;; ++i) {
    const auto name = "h" + std::to_string(i);
    if (std::find(csv.columns.begin(), csv.columns.end(), name) == csv.columns.end()) break;
    hidden_cols.push_back(csv.column(name));
  }
  for (std::size_t i = 0;; ++i) {
    const auto name = "logit" + std::to_string(i);
    if (std::find(csv.columns.begin(), csv.columns.end(), name) == csv.columns.end()) break;
    logit_cols.push_back(csv.column(name));
  }
  std::vector<GoldenStep> steps;
  steps.reserve(csv.rows.size());
  for (const auto& r : csv.rows) {
    GoldenStep s;
    s.image = static_cast<int>(parse_int(r[ci]));
    s.glimpse = static_cast<int>(parse_int(r[cg]));
    s.loc = {static_cast<int>(parse_int(r[cx])), static_cast<int>(parse_int(r[cy]))};
    s.loc_next = {static_cast<int>(parse_int(r[nx])), static_cast<int>(parse_int(r[ny]))};
    s.pred = static_cast<int>(parse_int(r[cp]));
    for (auto c : hidden_cols) s.hidden.push_back(parse_double(r[c]));
    for (auto c : logit_cols) s.logits.push_back(parse_double(r[c]));
    steps.push_back(std::move(s));
  }
  return steps;
}

void write_golden_trace(const std::filesystem::path& path, const std::vector<GoldenStep>& steps) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_error(Errc::io, "cannot write " + path.string());
  out.precision(17);
  out << "image,glimpse,loc_x,loc_y,next_x,next_y,pred";
  const std::size_t nh = steps.empty() ? 0 : steps.front().hidden.size();
  const std::size_t nl = steps.empty() ? 0 : steps.front().logits.size();
  for (std::size_t i = 0; i < nh; ++i) out << ",h" << i;
  for (std::size_t i = 0; i < nl; ++i) out << ",logit" << i;
  out << '\n';
  for (const auto& s : steps) {
    out << s.image << ',' << s.glimpse << ',' << s.loc.x << ',' << s.loc.y << ',' << s.loc_next.x << ','
        << s.loc_next.y << ',' << s.pred;
    for (double v : s.hidden) out << ',' << v;
    for (double v : s.logits) out << ',' << v;
    out << '\n';
  }
}

std::vector<GoldenStep> to_golden(int image_index, const GlimpseTrace& trace) {
  std::vector<GoldenStep> out;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& r = trace[t];
    out.push_back(GoldenStep{image_index, static_cast<int>(t), r.loc, r.loc_next, r.pred, r.hidden_next, r.logits});
  }
  return out;
}

TraceComparison compare_golden(const RamModel& model, const std::vector<Image>& images,
                               const std::vector<GoldenStep>& golden) {
  std::map<int, std::vector<const GoldenStep*>> by_image;
  for (const auto& s : golden) by_image[s.image].push_back(&s);

  TraceComparison cmp;
  for (auto& [index, steps] : by_image) {
    require(index >= 0 && static_cast<std::size_t>(index) < images.size(),
            "golden trace references image " + std::to_string(index));
    std::sort(steps.begin(), steps.end(), [](auto* a, auto* b) { return a->glimpse < b->glimpse; });
    require(steps.front()->glimpse == 0, "golden trace for image " + std::to_string(index) + " lacks glimpse 0");
    const auto result = ram_infer(model, images[index], steps.front()->loc);
    for (const auto* s : steps) {
      require(s->glimpse < static_cast<int>(result.trace.size()), "golden glimpse index exceeds n_glimpses");
      const auto& rec = result.trace[s->glimpse];
      ++cmp.steps;
      if (!(rec.loc == s->loc) || !(rec.loc_next == s->loc_next)) ++cmp.location_mismatches;
      if (rec.pred != s->pred) ++cmp.prediction_mismatches;
      require(rec.hidden_next.size() == s->hidden.size() && rec.logits.size() == s->logits.size(),
              "golden trace vector sizes do not match the model");
      for (std::size_t i = 0; i < s->hidden.size(); ++i)
        cmp.max_abs_error = std::max(cmp.max_abs_error, std::abs(rec.hidden_next[i] - s->hidden[i]));
      for (std::size_t i = 0; i < s->logits.size(); ++i)
        cmp.max_abs_error = std::max(cmp.max_abs_error, std::abs(rec.logits[i] - s->logits[i]));
    }
  }
  return cmp;
}

}  // namespace mbi
