#include "ccm/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ccm {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void rect(std::ostringstream& out, double x, double y, double w, double h,
          const std::string& fill, const std::string& cls) {
  out << "<rect class=\"" << cls << "\" x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\""
      << num(w) << "\" height=\"" << num(h) << "\" fill=\"" << fill
      << "\" stroke=\"#555555\" stroke-width=\"0.5\"/>\n";
}

void text(std::ostringstream& out, double x, double y, const std::string& s, int size,
          const std::string& anchor) {
  out << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
      << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
}

}  // namespace

std::string model_summary_svg(const CcmModel& model) {
  model.validate();
  const int g = model.g;
  const int d = model.d();

  const double margin_left = 70.0, margin_top = 46.0, margin_bottom = 16.0;
  const double panel_w = 250.0, panel_gap = 28.0;
  const double plot_h = std::max(140.0, 72.0 * g);
  const double width = margin_left + 3 * panel_w + 2 * panel_gap + 16.0;
  const double height = margin_top + plot_h + margin_bottom;

  const double x_rho = margin_left;
  const double x_tau = margin_left + panel_w + panel_gap;
  const double x_grid = margin_left + 2 * (panel_w + panel_gap);

  // classes sorted by decreasing proportion, stable on index
  std::vector<int> order(g);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return model.pi[a] > model.pi[b]; });

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" fill=\"#ffffff\"/>\n";
  text(out, x_rho + panel_w / 2, margin_top - 26.0, "block dependency (rho)", 12, "middle");
  text(out, x_tau + panel_w / 2, margin_top - 26.0, "modality links (tau)", 12, "middle");
  text(out, x_grid + panel_w / 2, margin_top - 26.0, "variables per block", 12, "middle");

  double y = margin_top;
  double cumulative = 0.0;
  for (int idx = 0; idx < g; ++idx) {
    const int k = order[idx];
    const double band_h = model.pi[k] * plot_h;
    cumulative += model.pi[k];

    out << "<rect x=\"" << num(margin_left - 4.0) << "\" y=\"" << num(y) << "\" width=\""
        << num(3 * panel_w + 2 * panel_gap + 8.0) << "\" height=\"" << num(band_h)
        << "\" fill=\"none\" stroke=\"#222222\" stroke-width=\"1\"/>\n";
    text(out, margin_left - 10.0, y + band_h, num(cumulative), 11, "end");

    // blocks ordered by decreasing rho, stable on block index
    const int nb = model.partition.n_blocks(k);
    std::vector<int> border(nb);
    std::iota(border.begin(), border.end(), 0);
    std::stable_sort(border.begin(), border.end(), [&](int a, int b) {
      return model.blocks[k][a].rho > model.blocks[k][b].rho;
    });

    std::vector<int> dep_blocks;  // multi-variable blocks carry rho/tau bars
    for (int b : border)
      if (model.partition.block(k, b).size() > 1) dep_blocks.push_back(b);

    const double pad = 3.0;
    if (!dep_blocks.empty()) {
      const double row_h = (band_h - 2 * pad) / static_cast<double>(dep_blocks.size());
      for (std::size_t r = 0; r < dep_blocks.size(); ++r) {
        const int b = dep_blocks[r];
        const double ry = y + pad + r * row_h;
        const double bar_h = std::max(2.0, row_h - 4.0);
        rect(out, x_rho, ry + (row_h - bar_h) / 2, model.blocks[k][b].rho * panel_w, bar_h,
             "#3b6ea5", "rho-bar");
        // tau entries, sorted decreasing
        if (model.blocks[k][b].maxdep) {
          auto tau = model.blocks[k][b].maxdep->tau;
          std::sort(tau.begin(), tau.end(), std::greater<double>());
          const double slot = panel_w / static_cast<double>(tau.size());
          for (std::size_t t = 0; t < tau.size(); ++t)
            rect(out, x_tau + t * slot + 1.0, ry + (row_h - bar_h) / 2,
                 std::max(0.0, tau[t] * (slot - 2.0)), bar_h, "#7a9e43", "tau-bar");
        }
      }
    }

    // membership grid: rows = blocks in the same order, columns = variables
    {
      const double cell_w = panel_w / static_cast<double>(d);
      const double cell_h = (band_h - 2 * pad) / static_cast<double>(nb);
      for (int r = 0; r < nb; ++r) {
        const int b = border[r];
        std::vector<char> member(d + 1, 0);
        for (int j : model.partition.block(k, b)) member[j] = 1;
        for (int j = 1; j <= d; ++j)
          rect(out, x_grid + (j - 1) * cell_w, y + pad + r * cell_h, cell_w, cell_h,
               member[j] ? "#222222" : "#ffffff", member[j] ? "grid-on" : "grid-off");
      }
    }
    y += band_h;
  }
  out << "</svg>\n";
  return out.str();
}

void save_summary_svg(const CcmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("svg: cannot write " + path);
  out << model_summary_svg(model);
}

}  // namespace ccm
