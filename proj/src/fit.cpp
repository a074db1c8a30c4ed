#include "facefit/fit.hpp"

#include "facefit/io_binary.hpp"
#include "facefit/noise.hpp"
#include "facefit/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace facefit {

// ---------------------------------------------------------------------------
// Adam

void AdamState::step(VecX& params, const VecX& gradients, const AdamParams& hp) {
  if (params.size() != m_.size() || gradients.size() != m_.size())
    throw std::invalid_argument("adam: parameter/state size mismatch");
  if (!gradients.allFinite()) {
    ++rejected_;
    return;
  }
  ++t_;
  m_ = hp.beta1 * m_ + (1.0 - hp.beta1) * gradients;
  v_ = hp.beta2 * v_ + (1.0 - hp.beta2) * gradients.cwiseProduct(gradients);
  const Real bc1 = 1.0 - std::pow(hp.beta1, Real(t_));
  const Real bc2 = 1.0 - std::pow(hp.beta2, Real(t_));
  const VecX m_hat = m_ / (bc1 > 0 ? bc1 : 1.0);
  const VecX v_hat = v_ / bc2;
  params.array() -= hp.learning_rate * m_hat.array() / (v_hat.array().sqrt() + hp.epsilon);
}

VecX AdamState::serialize() const {
  VecX out(2 + 2 * m_.size());
  out[0] = static_cast<Real>(t_);
  out[1] = static_cast<Real>(rejected_);
  out.segment(2, m_.size()) = m_;
  out.segment(2 + m_.size(), v_.size()) = v_;
  return out;
}

AdamState AdamState::deserialize(const VecX& blob) {
  const Index n = (blob.size() - 2) / 2;
  AdamState st(n);
  st.t_ = static_cast<std::int64_t>(blob[0]);
  st.rejected_ = static_cast<std::int64_t>(blob[1]);
  st.m_ = blob.segment(2, n);
  st.v_ = blob.segment(2 + n, n);
  return st;
}

// ---------------------------------------------------------------------------
// Parameter packing

void AlternationSchedule::validate() const {
  if (shape_steps < 0 || albedo_steps < 0) throw std::invalid_argument("schedule: negative steps");
  if (cycles < 1) throw std::invalid_argument("schedule: need at least one cycle");
  shape_weights.validate();
  albedo_weights.validate();
}

ColorGrid FitParams::albedo_for(Index identity) const {
  const IdentityParams& id = identities[std::size_t(identity)];
  ColorGrid out = albedo_mean;
  for (std::size_t k = 0; k < albedo_basis.size(); ++k)
    out.data() += id.albedo_coeffs[Index(k)] * albedo_basis[k].data();
  out.data() += id.albedo_residual.data();
  out.data() = out.data().cwiseMax(0.0);
  return out;
}

namespace {

struct ShapeLayout {
  Index per_view;   // s + psi + 6 + 27
  Index s_dim, e_dim;
  Index disp_texels;
  Index n_views_total;
  Index total;
};

ShapeLayout shape_layout(const FitParams& p, const BlendshapeModel& model) {
  ShapeLayout l;
  l.s_dim = model.shape_dim();
  l.e_dim = model.expr_dim();
  l.per_view = l.s_dim + l.e_dim + 6 + 27;
  l.disp_texels = p.identities.empty() ? 0 : p.identities.front().displacement.grid().texels();
  l.n_views_total = 0;
  for (const auto& vs : p.views) l.n_views_total += Index(vs.size());
  l.total = l.per_view * l.n_views_total + l.disp_texels * Index(p.identities.size());
  return l;
}

VecX pack_shape(const FitParams& p, const ShapeLayout& l) {
  VecX out(l.total);
  Index o = 0;
  for (const auto& vs : p.views)
    for (const auto& v : vs) {
      out.segment(o, l.s_dim) = v.s;
      o += l.s_dim;
      out.segment(o, l.e_dim) = v.psi;
      o += l.e_dim;
      out.segment<3>(o) = v.pose.rotation;
      o += 3;
      out.segment<3>(o) = v.pose.translation;
      o += 3;
      for (int b = 0; b < 9; ++b)
        for (int c = 0; c < 3; ++c) out[o++] = v.light.coefficients(b, c);
    }
  for (const auto& id : p.identities) {
    out.segment(o, l.disp_texels) = id.displacement.grid().data();
    o += l.disp_texels;
  }
  return out;
}

void unpack_shape(const VecX& in, const ShapeLayout& l, FitParams& p) {
  Index o = 0;
  for (auto& vs : p.views)
    for (auto& v : vs) {
      v.s = in.segment(o, l.s_dim);
      o += l.s_dim;
      v.psi = in.segment(o, l.e_dim);
      o += l.e_dim;
      v.pose = Pose(in.segment<3>(o), in.segment<3>(o + 3));
      o += 6;
      for (int b = 0; b < 9; ++b)
        for (int c = 0; c < 3; ++c) v.light.coefficients(b, c) = in[o++];
    }
  for (auto& id : p.identities) {
    id.displacement.grid().data() = in.segment(o, l.disp_texels);
    id.displacement.clamp();
    o += l.disp_texels;
  }
}

struct AlbedoLayout {
  Index rank;
  Index grid_values;  // texels * 3
  Index n_identities;
  Index total;
};

AlbedoLayout albedo_layout(const FitParams& p) {
  AlbedoLayout l;
  l.rank = Index(p.albedo_basis.size());
  l.grid_values = p.albedo_mean.data().size();
  l.n_identities = Index(p.identities.size());
  l.total = l.rank * l.grid_values + l.n_identities * (l.rank + l.grid_values);
  return l;
}

VecX pack_albedo(const FitParams& p, const AlbedoLayout& l) {
  VecX out(l.total);
  Index o = 0;
  for (const auto& comp : p.albedo_basis) {
    out.segment(o, l.grid_values) = Eigen::Map<const VecX>(comp.data().data(), l.grid_values);
    o += l.grid_values;
  }
  for (const auto& id : p.identities) {
    out.segment(o, l.rank) = id.albedo_coeffs;
    o += l.rank;
    out.segment(o, l.grid_values) =
        Eigen::Map<const VecX>(id.albedo_residual.data().data(), l.grid_values);
    o += l.grid_values;
  }
  return out;
}

void unpack_albedo(const VecX& in, const AlbedoLayout& l, FitParams& p) {
  Index o = 0;
  for (auto& comp : p.albedo_basis) {
    Eigen::Map<VecX>(comp.data().data(), l.grid_values) = in.segment(o, l.grid_values);
    o += l.grid_values;
  }
  for (auto& id : p.identities) {
    id.albedo_coeffs = in.segment(o, l.rank);
    o += l.rank;
    Eigen::Map<VecX>(id.albedo_residual.data().data(), l.grid_values) =
        in.segment(o, l.grid_values);
    o += l.grid_values;
  }
}

MatX2 normalized_landmarks(const ProjectedVertices& proj, const std::vector<int>& landmarks,
                           const Camera& camera) {
  MatX2 out(Index(landmarks.size()), 2);
  for (Index i = 0; i < out.rows(); ++i) {
    out(i, 0) = proj.screen(landmarks[std::size_t(i)], 0) / camera.width;
    out(i, 1) = proj.screen(landmarks[std::size_t(i)], 1) / camera.height;
  }
  return out;
}

}  // namespace

Scene scene_for_view(const FitParams& params, const FitDataset& dataset, Index identity,
                     Index view) {
  Scene scene;
  scene.model = dataset.model;
  const ViewParams& v = params.views[std::size_t(identity)][std::size_t(view)];
  scene.s = v.s;
  scene.psi = v.psi;
  scene.pose = v.pose;
  scene.light = v.light;
  scene.albedo = params.albedo_for(identity);
  scene.displacement = params.identities[std::size_t(identity)].displacement;
  return scene;
}

std::uint64_t hash_params(const FitParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const Real* d, Index n) { h = fnv1a(d, std::size_t(n) * sizeof(Real), h); };
  mix(params.albedo_mean.data().data(), params.albedo_mean.data().size());
  for (const auto& c : params.albedo_basis) mix(c.data().data(), c.data().size());
  for (const auto& id : params.identities) {
    mix(id.albedo_coeffs.data(), id.albedo_coeffs.size());
    mix(id.albedo_residual.data().data(), id.albedo_residual.data().size());
    mix(id.displacement.grid().data().data(), id.displacement.grid().data().size());
  }
  for (const auto& vs : params.views)
    for (const auto& v : vs) {
      mix(v.s.data(), v.s.size());
      mix(v.psi.data(), v.psi.size());
      mix(v.pose.rotation.data(), 3);
      mix(v.pose.translation.data(), 3);
      mix(v.light.coefficients.data(), 27);
    }
  return h;
}

FitState make_initial_state(const FitDataset& dataset, const AlternationSchedule& schedule,
                            int albedo_resolution, int displacement_resolution,
                            Index albedo_rank) {
  schedule.validate();
  FitState state;
  FitParams& p = state.params;
  const Vec3 gray = Vec3::Constant(0.5);
  p.albedo_mean = ColorGrid(albedo_resolution, gray);
  const Rng rng(0xfaceb00cull);
  for (Index k = 0; k < albedo_rank; ++k)
    p.albedo_basis.push_back(
        value_noise_colorgrid(albedo_resolution, rng.stream("albedo_basis", std::uint64_t(k)), 3,
                              0.1));
  const Index n_ids = Index(dataset.targets.size());
  for (Index i = 0; i < n_ids; ++i) {
    IdentityParams id;
    id.albedo_coeffs = VecX::Zero(albedo_rank);
    id.albedo_residual = ColorGrid(albedo_resolution);
    id.displacement = DisplacementMap(displacement_resolution);
    p.identities.push_back(std::move(id));
    std::vector<ViewParams> views(dataset.targets[std::size_t(i)].size());
    for (auto& v : views) {
      v.s = VecX::Zero(dataset.model->shape_dim());
      v.psi = VecX::Zero(dataset.model->expr_dim());
      v.light = SHLighting::ambient(Vec3::Constant(2.0));
    }
    p.views.push_back(std::move(views));
  }
  state.sc_means.assign(std::size_t(n_ids), VecX::Zero(dataset.model->shape_dim()));
  const ShapeLayout sl = shape_layout(p, *dataset.model);
  const AlbedoLayout al = albedo_layout(p);
  state.adam_shape = {AdamState(sl.total)};
  state.adam_albedo = {AdamState(al.total)};
  return state;
}

// ---------------------------------------------------------------------------
// Shape phase

void optimize_shape_phase(FitState& state, const FitDataset& dataset,
                          const AlternationSchedule& schedule,
                          const FeatureExtractor& id_features,
                          const FeatureExtractor& perc_features) {
  FitParams& p = state.params;
  const BlendshapeModel& model = *dataset.model;
  const ShapeLayout layout = shape_layout(p, model);
  const LossWeights& w = schedule.shape_weights;
  AdamParams adam_hp = schedule.shape_adam;

  // Albedo is frozen for the whole phase.
  std::vector<ColorGrid> albedo(std::size_t(p.identity_count()));
  for (Index i = 0; i < p.identity_count(); ++i) albedo[std::size_t(i)] = p.albedo_for(i);

  // Cached ground-truth features.
  std::vector<std::vector<VecX>> gt_id_feat(p.views.size()), gt_perc_feat(p.views.size());
  for (std::size_t i = 0; i < p.views.size(); ++i)
    for (std::size_t k = 0; k < p.views[i].size(); ++k) {
      gt_id_feat[i].push_back(id_features.extract(dataset.targets[i][k].image));
      gt_perc_feat[i].push_back(perc_features.extract(dataset.targets[i][k].image));
    }

  // Ground-truth landmarks live in the dataset targets.
  Real phase_start_total = -1.0;

  for (int step = 0; step < schedule.shape_steps; ++step) {
    VecX grad = VecX::Zero(layout.total);
    Real sum_id = 0, sum_perc = 0, sum_lmk = 0, sum_sc = 0, sum_reg = 0;

    Index off = 0;
    for (std::size_t i = 0; i < p.views.size(); ++i) {
      for (std::size_t k = 0; k < p.views[i].size(); ++k) {
        ViewParams& vp = p.views[i][k];
        Scene scene;
        scene.model = &model;
        scene.s = vp.s;
        scene.psi = vp.psi;
        scene.pose = vp.pose;
        scene.light = vp.light;
        scene.albedo = albedo[i];
        scene.displacement = p.identities[i].displacement;

        RenderContext ctx = render_forward(scene, dataset.camera, dataset.render_opts);
        const Image& ren = ctx.image();
        const ViewTarget& target = dataset.targets[i][k];

        // identity + perceptual pixel gradients
        VecX dfa_id;
        const Real l_id =
            identity_loss_features(id_features.extract(ren), gt_id_feat[i][k], &dfa_id);
        MatX3 dpix = id_features.backward(ren, w.id * dfa_id);
        const VecX perc_diff = perc_features.extract(ren) - gt_perc_feat[i][k];
        const Real l_perc = perc_diff.squaredNorm();
        dpix += perc_features.backward(ren, w.perc * 2.0 * perc_diff);

        // landmarks: direct screen-space gradient on the projected vertices
        const MatX2 lmk =
            normalized_landmarks(ctx.projected(), model.topology->landmarks, dataset.camera);
        MatX2 dlmk;
        const Real l_lmk = landmark_loss_grad(lmk, target.landmarks, dlmk);
        MatX2 dscreen_extra = MatX2::Zero(model.vertex_count(), 2);
        for (Index li = 0; li < dlmk.rows(); ++li) {
          const int v = model.topology->landmarks[std::size_t(li)];
          dscreen_extra(v, 0) += w.lmk * dlmk(li, 0) / dataset.camera.width;
          dscreen_extra(v, 1) += w.lmk * dlmk(li, 1) / dataset.camera.height;
        }

        SceneGrads g = render_backward(ctx, dpix, &dscreen_extra);

        // shape-center (frozen running mean) and regularizer
        const VecX sc_diff = vp.s - state.sc_means[i];
        sum_sc += sc_diff.squaredNorm();
        sum_reg += reg_loss(vp.s, vp.psi, p.identities[i].displacement.grid());
        sum_id += l_id;
        sum_perc += l_perc;
        sum_lmk += l_lmk;

        // pack gradients for this view
        grad.segment(off, layout.s_dim) += g.ds + w.sc * 2.0 * sc_diff + w.reg * 2.0 * vp.s;
        grad.segment(off + layout.s_dim, layout.e_dim) += g.dpsi + w.reg * 2.0 * vp.psi;
        grad.segment<3>(off + layout.s_dim + layout.e_dim) += g.drotation;
        grad.segment<3>(off + layout.s_dim + layout.e_dim + 3) += g.dtranslation;
        Index lo = off + layout.s_dim + layout.e_dim + 6;
        for (int b = 0; b < 9; ++b)
          for (int c = 0; c < 3; ++c) grad[lo++] += g.dlight(b, c);

        // displacement gradient goes to the identity slot
        const Index disp_off = layout.per_view * layout.n_views_total + Index(i) * layout.disp_texels;
        grad.segment(disp_off, layout.disp_texels) += g.ddisplacement;
        off += layout.per_view;
      }
    }
    // regularizer gradient on displacement (once per identity)
    for (std::size_t i = 0; i < p.identities.size(); ++i) {
      const Index disp_off = layout.per_view * layout.n_views_total + Index(i) * layout.disp_texels;
      grad.segment(disp_off, layout.disp_texels) +=
          w.reg * 2.0 * p.identities[i].displacement.grid().data();
    }

    const LossReport report = total_loss(
        LossStage::kShape,
        {{"id", sum_id}, {"perc", sum_perc}, {"lmk", sum_lmk}, {"sc", sum_sc}, {"reg", sum_reg}},
        w);
    if (phase_start_total < 0) phase_start_total = report.total;
    if (report.total > 10.0 * phase_start_total && phase_start_total > 0) {
      adam_hp.learning_rate *= 0.5;
      phase_start_total = report.total;
      std::fprintf(stderr, "facefit: shape phase diverging, halving lr to %g\n",
                   adam_hp.learning_rate);
    }

    VecX packed = pack_shape(p, layout);
    state.adam_shape[0].step(packed, grad, adam_hp);
    unpack_shape(packed, layout, p);

    // running shape-center means, frozen during the step
    for (std::size_t i = 0; i < p.views.size(); ++i) {
      VecX mean = VecX::Zero(layout.s_dim);
      for (const auto& v : p.views[i]) mean += v.s;
      mean /= static_cast<Real>(p.views[i].size());
      state.sc_means[i] =
          schedule.sc_mean_decay * state.sc_means[i] + (1.0 - schedule.sc_mean_decay) * mean;
    }

    state.trace.push_back({state.cycle, "shape", step, report});
  }
}

// ---------------------------------------------------------------------------
// Albedo phase

void optimize_albedo_phase(FitState& state, const FitDataset& dataset,
                           const AlternationSchedule& schedule,
                           const FeatureExtractor& id_features,
                           const FeatureExtractor& perc_features) {
  FitParams& p = state.params;
  const AlbedoLayout layout = albedo_layout(p);
  const LossWeights& w = schedule.albedo_weights;
  AdamParams adam_hp = schedule.albedo_adam;
  const Index grid_vals = layout.grid_values;
  const int albedo_n = p.albedo_mean.size();

  // Geometry is frozen: rasterize every view (and its mirrored twin) once.
  struct ViewCtx {
    RenderContext ctx, ctx_flip;
    VecX gt_id_feat, gt_perc_feat;
    Real lmk_term = 0;
  };
  std::vector<std::vector<ViewCtx>> cache(p.views.size());
  for (std::size_t i = 0; i < p.views.size(); ++i) {
    for (std::size_t k = 0; k < p.views[i].size(); ++k) {
      Scene scene = scene_for_view(p, dataset, Index(i), Index(k));
      ViewCtx vc;
      vc.ctx = render_forward(scene, dataset.camera, dataset.render_opts);
      const Scene flipped = scene.flipped();
      vc.ctx_flip = render_forward(flipped, dataset.camera, dataset.render_opts);
      vc.gt_id_feat = id_features.extract(dataset.targets[i][k].image);
      vc.gt_perc_feat = perc_features.extract(dataset.targets[i][k].image);
      const MatX2 lmk =
          normalized_landmarks(vc.ctx.projected(), dataset.model->topology->landmarks,
                               dataset.camera);
      vc.lmk_term = landmark_loss(lmk, dataset.targets[i][k].landmarks);
      vc.ctx.strip_to_albedo_cache();
      vc.ctx_flip.strip_to_albedo_cache();
      cache[i].push_back(std::move(vc));
    }
  }

  Real phase_start_total = -1.0;
  for (int step = 0; step < schedule.albedo_steps; ++step) {
    VecX grad = VecX::Zero(layout.total);
    Real sum_sym = 0, sum_id = 0, sum_perc = 0, sum_lmk = 0;

    for (std::size_t i = 0; i < p.views.size(); ++i) {
      // Materialize this identity's albedo and the clamp mask once per step.
      MatX3 pre = p.albedo_mean.data();
      for (std::size_t b = 0; b < p.albedo_basis.size(); ++b)
        pre += p.identities[i].albedo_coeffs[Index(b)] * p.albedo_basis[b].data();
      pre += p.identities[i].albedo_residual.data();
      ColorGrid albedo(albedo_n, MatX3(pre.cwiseMax(0.0)));
      const ColorGrid albedo_flipped = albedo.flipped_u();

      MatX3 dalbedo = MatX3::Zero(grid_vals / 3, 3);
      for (std::size_t k = 0; k < p.views[i].size(); ++k) {
        ViewCtx& vc = cache[i][k];
        vc.ctx.rerender_albedo(albedo);
        vc.ctx_flip.rerender_albedo(albedo_flipped);
        const Image& ren = vc.ctx.image();
        const Image& ren_flip = vc.ctx_flip.image();
        const ViewTarget& target = dataset.targets[i][k];

        MatX3 dren, dren_flip;
        const Real l_sym =
            sym_rec_loss_grad(ren, target.image, ren_flip, target.image_flipped, dren, dren_flip);
        MatX3 dpix = w.sym_rec * dren;

        VecX dfa_id;
        const Real l_id =
            identity_loss_features(id_features.extract(ren), vc.gt_id_feat, &dfa_id);
        dpix += id_features.backward(ren, w.id * dfa_id);
        const VecX perc_diff = perc_features.extract(ren) - vc.gt_perc_feat;
        const Real l_perc = perc_diff.squaredNorm();
        dpix += perc_features.backward(ren, w.perc * 2.0 * perc_diff);

        dalbedo += vc.ctx.backward_albedo(dpix);
        const MatX3 dalb_flip = vc.ctx_flip.backward_albedo(w.sym_rec * dren_flip);
        // Mirror the flipped-space gradient back to albedo texel space.
        for (int y = 0; y < albedo_n; ++y)
          for (int x = 0; x < albedo_n; ++x)
            dalbedo.row(Index(y) * albedo_n + x) +=
                dalb_flip.row(Index(y) * albedo_n + (albedo_n - 1 - x));

        sum_sym += l_sym;
        sum_id += l_id;
        sum_perc += l_perc;
        sum_lmk += vc.lmk_term;
      }

      // Clamp subgradient, then chain into basis, coefficients and residual.
      for (Index t = 0; t < dalbedo.rows(); ++t)
        for (int c = 0; c < 3; ++c)
          if (pre(t, c) <= 0.0) dalbedo(t, c) = 0.0;

      const Eigen::Map<const VecX> dalb_flat(dalbedo.data(), grid_vals);
      for (std::size_t b = 0; b < p.albedo_basis.size(); ++b) {
        const Eigen::Map<const VecX> basis_flat(p.albedo_basis[b].data().data(), grid_vals);
        grad.segment(Index(b) * grid_vals, grid_vals) +=
            p.identities[i].albedo_coeffs[Index(b)] * dalb_flat;
        grad[layout.rank * grid_vals + Index(i) * (layout.rank + grid_vals) + Index(b)] +=
            basis_flat.dot(dalb_flat);
      }
      grad.segment(layout.rank * grid_vals + Index(i) * (layout.rank + grid_vals) + layout.rank,
                   grid_vals) += dalb_flat;
    }

    const LossReport report = total_loss(
        LossStage::kAlbedo,
        {{"sym_rec", sum_sym}, {"id", sum_id}, {"perc", sum_perc}, {"lmk", sum_lmk}}, w);
    if (phase_start_total < 0) phase_start_total = report.total;
    if (report.total > 10.0 * phase_start_total && phase_start_total > 0) {
      adam_hp.learning_rate *= 0.5;
      phase_start_total = report.total;
      std::fprintf(stderr, "facefit: albedo phase diverging, halving lr to %g\n",
                   adam_hp.learning_rate);
    }

    VecX packed = pack_albedo(p, layout);
    state.adam_albedo[0].step(packed, grad, adam_hp);
    unpack_albedo(packed, layout, p);
    state.trace.push_back({state.cycle, "albedo", step, report});
  }
}

// ---------------------------------------------------------------------------
// Alternation + checkpointing

void alternate(FitState& state, const FitDataset& dataset, const AlternationSchedule& schedule,
               const std::string& checkpoint_path,
               const std::function<void(const TraceEntry&)>& on_step) {
  schedule.validate();
  auto id_feat = make_identity_extractor(schedule.feature_dim);
  auto perc_feat = make_perceptual_extractor(schedule.feature_dim);

  auto flush_trace = [&](std::size_t from) {
    if (on_step)
      for (std::size_t t = from; t < state.trace.size(); ++t) on_step(state.trace[t]);
  };

  while (state.cycle < schedule.cycles) {
    if (state.phase == 0) {
      const std::size_t before = state.trace.size();
      optimize_shape_phase(state, dataset, schedule, *id_feat, *perc_feat);
      flush_trace(before);
      state.phase = 1;
      if (!checkpoint_path.empty() && schedule.checkpoint_every_phase > 0)
        state.save_checkpoint(checkpoint_path);
    }
    {
      const std::size_t before = state.trace.size();
      optimize_albedo_phase(state, dataset, schedule, *id_feat, *perc_feat);
      flush_trace(before);
      state.phase = 0;
      ++state.cycle;
      if (!checkpoint_path.empty() && schedule.checkpoint_every_phase > 0)
        state.save_checkpoint(checkpoint_path);
    }
  }
}

void FitState::save_checkpoint(const std::string& path, const std::string& manifest_extra) const {
  BinaryBlobWriter blob(path);
  const FitParams& p = params;
  blob.add("albedo_mean", Eigen::Map<const VecX>(p.albedo_mean.data().data(),
                                                 p.albedo_mean.data().size()));
  for (std::size_t b = 0; b < p.albedo_basis.size(); ++b)
    blob.add("albedo_basis/" + std::to_string(b),
             Eigen::Map<const VecX>(p.albedo_basis[b].data().data(),
                                    p.albedo_basis[b].data().size()));
  for (std::size_t i = 0; i < p.identities.size(); ++i) {
    const std::string prefix = "identity/" + std::to_string(i) + "/";
    blob.add(prefix + "albedo_coeffs", p.identities[i].albedo_coeffs);
    blob.add(prefix + "albedo_residual",
             Eigen::Map<const VecX>(p.identities[i].albedo_residual.data().data(),
                                    p.identities[i].albedo_residual.data().size()));
    blob.add(prefix + "displacement", p.identities[i].displacement.grid().data());
    blob.add(prefix + "sc_mean", sc_means[i]);
    for (std::size_t k = 0; k < p.views[i].size(); ++k) {
      const ViewParams& v = p.views[i][k];
      const std::string vp = prefix + "view/" + std::to_string(k) + "/";
      blob.add(vp + "s", v.s);
      blob.add(vp + "psi", v.psi);
      VecX pose(6);
      pose << v.pose.rotation, v.pose.translation;
      blob.add(vp + "pose", pose);
      VecX light(27);
      for (int b = 0; b < 9; ++b)
        for (int c = 0; c < 3; ++c) light[b * 3 + c] = v.light.coefficients(b, c);
      blob.add(vp + "light", light);
    }
  }
  blob.add("adam/shape", adam_shape[0].serialize());
  blob.add("adam/albedo", adam_albedo[0].serialize());
  VecX pos(2);
  pos << Real(cycle), Real(phase);
  blob.add("position", pos);
  blob.finish();

  nlohmann::json manifest;
  manifest["identities"] = params.identities.size();
  std::vector<std::size_t> view_counts;
  for (const auto& vs : params.views) view_counts.push_back(vs.size());
  manifest["views"] = view_counts;
  manifest["albedo_resolution"] = params.albedo_mean.size();
  manifest["albedo_rank"] = params.albedo_basis.size();
  manifest["displacement_resolution"] =
      params.identities.empty() ? 0 : params.identities.front().displacement.size();
  manifest["cycle"] = cycle;
  manifest["phase"] = phase;
  if (!manifest_extra.empty()) manifest["run"] = nlohmann::json::parse(manifest_extra);
  write_text_file(path + ".json", manifest.dump(2) + "\n");
}

FitState FitState::load_checkpoint(const std::string& path, const BlendshapeModel& model) {
  const nlohmann::json manifest = nlohmann::json::parse(read_text_file(path + ".json"));
  BinaryBlobReader blob(path);

  FitState state;
  FitParams& p = state.params;
  const int albedo_res = manifest["albedo_resolution"].get<int>();
  const Index rank = manifest["albedo_rank"].get<Index>();
  const int disp_res = manifest["displacement_resolution"].get<int>();
  const std::size_t n_ids = manifest["identities"].get<std::size_t>();
  const auto view_counts = manifest["views"].get<std::vector<std::size_t>>();

  auto as_grid = [&](const VecX& v) {
    MatX3 data(v.size() / 3, 3);
    Eigen::Map<VecX>(data.data(), v.size()) = v;
    return ColorGrid(albedo_res, std::move(data));
  };
  p.albedo_mean = as_grid(blob.get("albedo_mean"));
  for (Index b = 0; b < rank; ++b)
    p.albedo_basis.push_back(as_grid(blob.get("albedo_basis/" + std::to_string(b))));
  for (std::size_t i = 0; i < n_ids; ++i) {
    const std::string prefix = "identity/" + std::to_string(i) + "/";
    IdentityParams id;
    id.albedo_coeffs = blob.get(prefix + "albedo_coeffs");
    id.albedo_residual = as_grid(blob.get(prefix + "albedo_residual"));
    id.displacement = DisplacementMap(ScalarGrid(disp_res, blob.get(prefix + "displacement")));
    p.identities.push_back(std::move(id));
    state.sc_means.push_back(blob.get(prefix + "sc_mean"));
    std::vector<ViewParams> views;
    for (std::size_t k = 0; k < view_counts[i]; ++k) {
      const std::string vp = prefix + "view/" + std::to_string(k) + "/";
      ViewParams v;
      v.s = blob.get(vp + "s");
      v.psi = blob.get(vp + "psi");
      const VecX pose = blob.get(vp + "pose");
      v.pose = Pose(pose.segment<3>(0), pose.segment<3>(3));
      const VecX light = blob.get(vp + "light");
      for (int b = 0; b < 9; ++b)
        for (int c = 0; c < 3; ++c) v.light.coefficients(b, c) = light[b * 3 + c];
      views.push_back(std::move(v));
    }
    p.views.push_back(std::move(views));
  }
  state.adam_shape = {AdamState::deserialize(blob.get("adam/shape"))};
  state.adam_albedo = {AdamState::deserialize(blob.get("adam/albedo"))};
  const VecX pos = blob.get("position");
  state.cycle = static_cast<int>(pos[0]);
  state.phase = static_cast<int>(pos[1]);
  (void)model;
  return state;
}

}  // namespace facefit
