#include "advpatch/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include "advpatch/binary_io.hpp"

namespace advpatch {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string reports_to_csv(std::span<const EvalReport> reports, std::uint64_t config_hash) {
  std::ostringstream os;
  os << "protocol,target,scale,trials,successes,rate,model,seed\n";
  std::uint64_t seed = 0;
  for (const auto& r : reports) {
    seed = r.seed;
    for (const auto& e : r.entries) {
      for (const auto& m : e.per_model) {
        os << protocol_name(r.protocol) << ',' << r.target << ',' << general(e.scale) << ',' << m.trials << ','
           << m.successes << ',' << fixed(m.rate, 6) << ',' << m.model << ',' << r.seed << '\n';
      }
    }
  }
  os << "# config_hash=" << hex64(config_hash) << " seed=" << seed << '\n';
  return os.str();
}

std::string reports_to_svg(std::span<const EvalReport> reports, std::uint64_t config_hash) {
  constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 160, kTop = 30, kBottom = 50;
  constexpr std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#ff7f0e"};
  double max_scale = 0.0;
  for (const auto& r : reports) {
    for (const auto& e : r.entries) max_scale = std::max(max_scale, e.scale);
  }
  if (max_scale <= 0.0) max_scale = 1.0;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double s) { return kLeft + plot_w * s / max_scale; };
  auto py = [&](double rate) { return kTop + plot_h * (1.0 - rate); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<!-- config_hash=" << hex64(config_hash) << " seed=" << (reports.empty() ? 0 : reports.front().seed)
     << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kLeft + plot_w << "\" y2=\"" << py(0)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kLeft << "\" y2=\"" << py(1)
     << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double rate = tick / 4.0;
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << fixed(py(rate) + 4, 1) << "\" text-anchor=\"end\">"
       << fixed(rate, 2) << "</text>\n";
    const double s = max_scale * tick / 4.0;
    os << "<text x=\"" << fixed(px(s), 1) << "\" y=\"" << py(0) + 18 << "\" text-anchor=\"middle\">"
       << fixed(s, 3) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
     << "\" text-anchor=\"middle\">patch scale (fraction of image area)</text>\n";
  os << "<text x=\"15\" y=\"" << kTop + plot_h / 2 << "\" transform=\"rotate(-90 15 " << kTop + plot_h / 2
     << ")\" text-anchor=\"middle\">targeted success rate</text>\n";

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const char* color = kColors[i % kColors.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < r.entries.size(); ++k) {
      os << (k ? " " : "") << fixed(px(r.entries[k].scale), 2) << ',' << fixed(py(r.entries[k].rate), 2);
    }
    os << "\"/>\n";
    const double ly = kTop + 20.0 * static_cast<double>(i);
    os << "<line x1=\"" << kLeft + plot_w + 15 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + plot_w + 35 << "\" y2=\""
       << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kLeft + plot_w + 40 << "\" y=\"" << ly + 4 << "\">" << protocol_name(r.protocol)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace advpatch
