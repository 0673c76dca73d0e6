#include "network.hpp"

#include <algorithm>
#include <cmath>

namespace mitoviz::detail {

namespace {

// Output range of x for which x + kx - 1 falls inside [a0, a1).
inline void span_for(int b0, int b1, int a0, int a1, int k, int& lo, int& hi) {
  lo = std::max(b0, a0 - k + 1);
  hi = std::min(b1, a1 - k + 1);
}

void conv_forward(const ConvLayer& layer, const std::vector<double>& in, const Window& a, std::vector<double>& out,
                  const Window& b) {
  const std::size_t na = a.size(), nb = b.size();
  out.assign(nb * layer.out_channels, 0.0);
  for (int o = 0; o < layer.out_channels; ++o) {
    double* po = out.data() + o * nb;
    std::fill(po, po + nb, layer.bias[o]);
    for (int i = 0; i < layer.in_channels; ++i) {
      const double* pi = in.data() + i * na;
      for (int ky = 0; ky < 3; ++ky) {
        int ylo, yhi;
        span_for(b.y0, b.y1, a.y0, a.y1, ky, ylo, yhi);
        for (int kx = 0; kx < 3; ++kx) {
          const double wgt = layer.weight(o, i, ky, kx);
          if (wgt == 0.0) continue;
          int xlo, xhi;
          span_for(b.x0, b.x1, a.x0, a.x1, kx, xlo, xhi);
          if (xhi <= xlo) continue;
          for (int y = ylo; y < yhi; ++y) {
            double* row_o = po + b.at(xlo, y);
            const double* row_i = pi + a.at(xlo + kx - 1, y + ky - 1);
            const int n = xhi - xlo;
            for (int x = 0; x < n; ++x) row_o[x] += wgt * row_i[x];
          }
        }
      }
    }
  }
}

void conv_backward(const ConvLayer& layer, const std::vector<double>& in, const Window& a,
                   const std::vector<double>& d_out, const Window& b, ConvLayer& grad, std::vector<double>* d_in) {
  const std::size_t na = a.size(), nb = b.size();
  if (d_in) d_in->assign(na * layer.in_channels, 0.0);
  for (int o = 0; o < layer.out_channels; ++o) {
    const double* pd = d_out.data() + o * nb;
    double bsum = 0.0;
    for (std::size_t k = 0; k < nb; ++k) bsum += pd[k];
    grad.bias[o] += bsum;
    for (int i = 0; i < layer.in_channels; ++i) {
      const double* pi = in.data() + i * na;
      double* pdi = d_in ? d_in->data() + i * na : nullptr;
      for (int ky = 0; ky < 3; ++ky) {
        int ylo, yhi;
        span_for(b.y0, b.y1, a.y0, a.y1, ky, ylo, yhi);
        for (int kx = 0; kx < 3; ++kx) {
          const double wgt = layer.weight(o, i, ky, kx);
          int xlo, xhi;
          span_for(b.x0, b.x1, a.x0, a.x1, kx, xlo, xhi);
          const int n = xhi - xlo;
          if (n <= 0) continue;
          double acc = 0.0;
          for (int y = ylo; y < yhi; ++y) {
            const double* row_d = pd + b.at(xlo, y);
            const std::size_t off = a.at(xlo + kx - 1, y + ky - 1);
            const double* row_i = pi + off;
            for (int x = 0; x < n; ++x) acc += row_d[x] * row_i[x];
            if (pdi) {
              double* row_di = pdi + off;
              for (int x = 0; x < n; ++x) row_di[x] += wgt * row_d[x];
            }
          }
          grad.weight(o, i, ky, kx) += acc;
        }
      }
    }
  }
}

void relu(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// Zero the gradient where the post-ReLU activation is not positive.
void relu_mask(std::vector<double>& d, const std::vector<double>& act) {
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (!(act[k] > 0.0)) d[k] = 0.0;
  }
}

}  // namespace

Window grow(const Rect& tile, int r, const Extent& e) {
  return {std::max(0, tile.x - r), std::max(0, tile.y - r), std::min(e.width, tile.right() + r),
          std::min(e.height, tile.bottom() + r)};
}

void forward(const ClassifierModel& model, const FeatureStack& features, const Rect& tile, Activations& act) {
  const Extent& e = features.extent();
  for (int k = 0; k < 4; ++k) act.win[k] = grow(tile, 3 - k, e);

  const Window& w0 = act.win[0];
  const int d = features.planes();
  act.input.resize(w0.size() * d);
  for (int c = 0; c < d; ++c) {
    const auto plane = features.plane(c);
    double* dst = act.input.data() + c * w0.size();
    for (int y = w0.y0; y < w0.y1; ++y) {
      const float* src = plane.data() + e.index(w0.x0, y);
      for (int x = 0; x < w0.w(); ++x) *dst++ = src[x];
    }
  }

  conv_forward(model.layers[0], act.input, act.win[0], act.hidden1, act.win[1]);
  relu(act.hidden1);
  conv_forward(model.layers[1], act.hidden1, act.win[1], act.hidden2, act.win[2]);
  relu(act.hidden2);
  conv_forward(model.layers[2], act.hidden2, act.win[2], act.probs, act.win[3]);

  const int c = model.classes();
  const std::size_t n = act.win[3].size();
  for (std::size_t p = 0; p < n; ++p) {
    double mx = act.probs[p];
    for (int k = 1; k < c; ++k) mx = std::max(mx, act.probs[k * n + p]);
    double sum = 0.0;
    for (int k = 0; k < c; ++k) sum += act.probs[k * n + p] = std::exp(act.probs[k * n + p] - mx);
    for (int k = 0; k < c; ++k) act.probs[k * n + p] /= sum;
  }
}

void backward(const ClassifierModel& model, const Activations& act, const std::vector<double>& d_probs,
              ClassifierModel& grad) {
  const int c = model.classes();
  const std::size_t n = act.win[3].size();
  std::vector<double> d_logits(n * c);
  for (std::size_t p = 0; p < n; ++p) {
    double dot = 0.0;
    for (int k = 0; k < c; ++k) dot += act.probs[k * n + p] * d_probs[k * n + p];
    for (int k = 0; k < c; ++k) d_logits[k * n + p] = act.probs[k * n + p] * (d_probs[k * n + p] - dot);
  }

  std::vector<double> d_h2, d_h1;
  conv_backward(model.layers[2], act.hidden2, act.win[2], d_logits, act.win[3], grad.layers[2], &d_h2);
  relu_mask(d_h2, act.hidden2);
  conv_backward(model.layers[1], act.hidden1, act.win[1], d_h2, act.win[2], grad.layers[1], &d_h1);
  relu_mask(d_h1, act.hidden1);
  conv_backward(model.layers[0], act.input, act.win[0], d_h1, act.win[1], grad.layers[0], nullptr);
}

}  // namespace mitoviz::detail
