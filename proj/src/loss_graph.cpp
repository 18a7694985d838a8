#include "mri/loss_graph.hpp"

#include "mri/metrics.hpp"

namespace mri {
namespace {

struct SsimTermNodes {
    NodeId luminance_cs; // scalar: mean of l*cs map
    NodeId cs;           // scalar: mean of cs map
};

NodeId gauss_window_node(Tape& t) {
    Tensor win(1, 1, kSsimWindow, kSsimWindow);
    win.data = ssim_window();
    return t.constant(std::move(win));
}

SsimTermNodes ssim_term_nodes(Tape& t, NodeId x, NodeId y, double data_range) {
    const Tensor& vx = t.value(x);
    if (vx.h < kSsimWindow || vx.w < kSsimWindow)
        throw InvalidInputError("ssim_graph: image smaller than the 11x11 window");
    NodeId win = gauss_window_node(t);
    NodeId mx = t.conv2d(x, win, Padding::valid);
    NodeId my = t.conv2d(y, win, Padding::valid);
    NodeId mxx = t.conv2d(t.mul(x, x), win, Padding::valid);
    NodeId myy = t.conv2d(t.mul(y, y), win, Padding::valid);
    NodeId mxy = t.conv2d(t.mul(x, y), win, Padding::valid);

    const double c1 = (kSsimK1 * data_range) * (kSsimK1 * data_range);
    const double c2 = (kSsimK2 * data_range) * (kSsimK2 * data_range);

    NodeId var_x = t.sub(mxx, t.mul(mx, mx));
    NodeId var_y = t.sub(myy, t.mul(my, my));
    NodeId cov = t.sub(mxy, t.mul(mx, my));

    NodeId l = t.div(t.add_scalar(t.scalar_mul(t.mul(mx, my), 2.0), c1),
                     t.add_scalar(t.add(t.mul(mx, mx), t.mul(my, my)), c1));
    NodeId cs = t.div(t.add_scalar(t.scalar_mul(cov, 2.0), c2),
                      t.add_scalar(t.add(var_x, var_y), c2));
    return {t.mean(t.mul(l, cs)), t.mean(cs)};
}

} // namespace

NodeId l1_loss_graph(Tape& t, NodeId pred, NodeId target, double eps) {
    return t.mean(t.charbonnier(t.sub(pred, target), eps));
}

NodeId ssim_graph(Tape& t, NodeId pred, NodeId target, double data_range) {
    if (data_range <= 0.0) throw InvalidConfigError("ssim_graph: data_range must be positive");
    return ssim_term_nodes(t, pred, target, data_range).luminance_cs;
}

NodeId msssim_graph(Tape& t, NodeId pred, NodeId target, double data_range, int scales) {
    if (data_range <= 0.0) throw InvalidConfigError("msssim_graph: data_range must be positive");
    if (scales < 1 || scales > 5) throw InvalidConfigError("msssim_graph: scales must be in [1, 5]");
    const Tensor& vp = t.value(pred);
    const int m = ms_ssim_scale_count(vp.h, vp.w, scales);
    if (m < 1) throw InvalidInputError("msssim_graph: image smaller than the 11x11 window");

    double wsum = 0.0;
    for (int j = 0; j < m; ++j) wsum += kMsSsimWeights[j];

    NodeId x = pred, y = target;
    NodeId value = -1;
    for (int j = 0; j < m; ++j) {
        SsimTermNodes terms = ssim_term_nodes(t, x, y, data_range);
        NodeId term = (j == m - 1) ? terms.luminance_cs : terms.cs;
        NodeId powed = t.pow_const(t.relu(term), kMsSsimWeights[j] / wsum);
        value = (j == 0) ? powed : t.mul(value, powed);
        if (j + 1 < m) {
            x = t.avgpool2(x);
            y = t.avgpool2(y);
        }
    }
    return value;
}

NodeId compound_loss_graph(Tape& t, NodeId pred, NodeId target, double alpha, double beta,
                           double data_range, int scales) {
    NodeId l1 = l1_loss_graph(t, pred, target);
    NodeId ms = msssim_graph(t, pred, target, data_range, scales);
    NodeId one_minus = t.add_scalar(t.scalar_mul(ms, -1.0), 1.0);
    return t.add(t.scalar_mul(l1, alpha), t.scalar_mul(one_minus, beta));
}

} // namespace mri
