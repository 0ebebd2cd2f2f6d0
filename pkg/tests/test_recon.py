import dataclasses
import os

import numpy as np
import pytest

from headrecon.config import NetworkConfig
from headrecon.exception import EmptyBatch, IoError, MaskTooSmall
from headrecon.optimizer import save_checkpoint
from headrecon.recon import HISTORY_COLUMNS, RayBatch, Reconstruction, \
    SurfaceHits, TrainedModel, gradient_report, loss_mask, loss_proxy, \
    loss_rgb, loss_semantic, render_view, sample_rays, total_loss, train
from headrecon.scene import HAIR_LABEL
from headrecon.sdf import AnalyticSphere
from headrecon.tracer import trace_rays


def _batch(n, *, inside=True, colors=0.6, labels=1):
    return RayBatch(0, np.zeros((n, 2)), np.full(n, inside), np.zeros(n, bool),
                    np.full((n, 3), colors), np.broadcast_to(labels, n).copy(),
                    np.zeros((n, 2)))


def _hits(n, feature_width=2):
    x = np.zeros((n, 3))
    v = np.tile([0.0, 0.0, 1.0], (n, 1))
    return SurfaceHits(np.arange(n), x, v, -v, np.zeros((n, feature_width)))


def test_sampled_rays(tiny_scene):
    view = tiny_scene.views[0]
    batch = sample_rays(tiny_scene, 0, (8, 2), seed=5)
    head = batch.inside & ~batch.hair
    assert np.count_nonzero(head) == 8
    assert np.count_nonzero(~batch.inside) == 8
    assert not np.any(batch.hair & ~batch.inside)

    cols, rows = (batch.pixels - 0.5).astype(int).T
    assert np.allclose(batch.pixels % 1.0, 0.5)
    assert np.array_equal(view.mask[rows, cols], batch.inside)
    assert np.all(view.hair_mask[rows, cols][batch.hair])
    assert np.array_equal(batch.colors, view.image[rows, cols])
    assert np.array_equal(batch.labels, view.labels[rows, cols])

    again = sample_rays(tiny_scene, 0, (8, 2), seed=5)
    assert np.array_equal(again.pixels, batch.pixels)


def test_head_mask_too_small(tiny_scene):
    with pytest.raises(MaskTooSmall):
        sample_rays(tiny_scene, 0, (10000, 0))


def test_proxy_loss():
    sphere = AnalyticSphere()
    points = np.random.default_rng(2).normal(size=(40, 3))
    points /= np.linalg.norm(points, axis=-1, keepdims=True)
    assert float(loss_proxy(sphere, points)) == pytest.approx(0.0, abs=1e-12)
    assert float(loss_proxy(sphere, 1.1 * points)) == pytest.approx(0.1)
    with pytest.raises(EmptyBatch):
        loss_proxy(sphere, np.zeros((0, 3)))


def test_rgb_loss(rng):
    _, color, _ = NetworkConfig.toy().networks()
    params = color.init_params(rng, zero=True)
    # the zero network renders 0.5 in every channel
    assert float(loss_rgb(color, params, _hits(5), _batch(5))) == \
        pytest.approx(0.3)
    assert float(loss_rgb(color, params, _hits(0), _batch(5))) == 0.0
    with pytest.raises(EmptyBatch):
        loss_rgb(color, params, _hits(0), _batch(5, inside=False))


def test_semantic_loss(rng):
    _, _, semantic = NetworkConfig.toy().networks()
    params = semantic.init_params(rng, zero=True)
    batch = _batch(6, labels=np.arange(1, 7))
    assert float(loss_semantic(semantic, params, _hits(6), batch)) == \
        pytest.approx(np.log(6.0))

    hair = _batch(3, labels=HAIR_LABEL)
    assert float(loss_semantic(semantic, params, _hits(3), hair,
                               exclude_hair=True)) == 0.0
    assert float(loss_semantic(semantic, params, _hits(3), hair)) > 0.0
    with pytest.raises(EmptyBatch):
        loss_semantic(semantic, params, _hits(0), _batch(3, inside=False))


def test_mask_loss_of_tangent_rays():
    sphere = AnalyticSphere()
    origins = np.array([[0.0, 1.0, -3.0], [-1.0, 0.0, -3.0]])
    dirs = np.tile([0.0, 0.0, 1.0], (2, 1))
    batch = _batch(2, inside=False)
    trace = trace_rays(sphere, origins, dirs)
    # both rays touch the surface at t = 3, so min f is 0 and S = 1/2
    value = loss_mask(sphere, origins, dirs, batch, trace, 50.0,
                      t_star=np.array([3.0, 3.0]))
    assert float(value) == pytest.approx(np.log(2.0) / 50.0)

    with pytest.raises(EmptyBatch):
        loss_mask(sphere, np.zeros((0, 3)), np.zeros((0, 3)), _batch(0),
                  trace_rays(sphere, np.zeros(3), np.zeros((0, 3))), 50.0)


def test_mask_loss_ignores_hits_inside_the_mask():
    sphere = AnalyticSphere()
    origins = np.array([[0.0, 0.0, -3.0]])
    dirs = np.array([[0.0, 0.0, 1.0]])
    trace = trace_rays(sphere, origins, dirs)
    assert trace.hit[0]
    assert float(loss_mask(sphere, origins, dirs, _batch(1), trace,
                           50.0)) == 0.0


def test_inactive_terms_have_zero_gradient(tiny_scene, toy_config):
    recon = Reconstruction(tiny_scene, toy_config)
    params = recon.model.params
    early = total_loss(recon, params, 0, 0)
    assert set(early.terms) == {'rgb', 'mask', 'eikonal', 'proxy'}
    start, stop = params.span('semantic.')
    assert not np.any(early.gradient.values[start:stop])
    start, stop = params.span('color.')
    assert np.any(early.gradient.values[start:stop])

    late = total_loss(recon, params, 0, toy_config.epochs - 1)
    assert {'semantic', 'orientation'} <= set(late.terms)
    start, stop = params.span('semantic.')
    assert np.any(late.gradient.values[start:stop])


def test_missing_data_disables_terms(tiny_scene, toy_config):
    no_proxy = dataclasses.replace(tiny_scene, proxy_mesh=None)
    assert 'proxy' not in Reconstruction(no_proxy, toy_config).terms_available

    views = [dataclasses.replace(view, orientation=None)
             for view in tiny_scene.views]
    bare = dataclasses.replace(tiny_scene, views=views)
    recon = Reconstruction(bare, toy_config)
    assert 'orientation' not in recon.terms_available
    assert 'orientation' not in recon.active_terms(toy_config.epochs - 1)

    ablated = toy_config.replace(ablation='baseline')
    assert Reconstruction(tiny_scene, ablated).terms_available == \
        {'rgb', 'mask', 'eikonal'}


def test_prepared_inputs_are_reproducible(tiny_scene, toy_config):
    recon = Reconstruction(tiny_scene, toy_config)
    values = recon.model.params.values
    first = recon.prepare(values, 1, 2)
    second = recon.prepare(values, 1, 2)
    assert np.array_equal(first.batch.pixels, second.batch.pixels)
    assert np.array_equal(first.eikonal, second.eikonal)
    assert np.array_equal(first.t_star, second.t_star)
    other = recon.prepare(values, 1, 1)
    assert not np.array_equal(first.eikonal, other.eikonal)


def test_gradients_match_central_differences(tiny_scene, toy_config):
    recon = Reconstruction(tiny_scene, toy_config)
    params = recon.model.params
    indices = list(range(0, len(params.values), 7))
    indices += list(range(*params.span('camera.')))
    report = gradient_report(recon, params, indices=indices)
    assert set(report) == {'rgb', 'mask', 'eikonal', 'proxy', 'semantic',
                           'orientation'}
    for name, error in report.items():
        assert error < 1e-4, name


@pytest.mark.slow
def test_training_writes_history_and_checkpoints(tmp_path, tiny_scene,
                                                 toy_config):
    config = toy_config.replace(checkpoint_every=1)
    outdir = str(tmp_path / 'run')
    result = train(tiny_scene, config, outdir=outdir)
    assert [row['epoch'] for row in result.history] == [0, 1, 2]
    assert [row['stage'] for row in result.history] == [1, 2, 3]
    assert result.history[0]['semantic'] == 0.0

    with open(os.path.join(outdir, 'history.csv')) as fd:
        lines = fd.read().splitlines()
    assert lines[0].split(',') == list(HISTORY_COLUMNS)
    assert len(lines) == 4
    for epoch in (1, 2, 3):
        assert os.path.isfile(os.path.join(outdir, 'checkpoint-%04d.json' %
                                           epoch))

    model, adam, extra = TrainedModel.load(os.path.join(outdir, 'final.json'))
    assert np.array_equal(model.params.values, result.model.params.values)
    assert adam is not None and adam.t == 2 * config.epochs
    assert extra['epoch'] == config.epochs
    assert extra['config']['seed'] == 0

    # same seed and one thread: the same parameters again
    again = train(tiny_scene, config)
    assert np.array_equal(again.model.params.values,
                          result.model.params.values)


def test_frozen_cameras(tiny_scene, toy_config):
    config = toy_config.replace(optimize_cameras=False,
                                schedule=toy_config.schedule.replace(
                                        epochs=1, first=0, second=1))
    result = train(tiny_scene, config)
    start, stop = result.model.params.span('camera.')
    assert not np.any(result.model.params.values[start:stop])


def test_loading_something_else(tmp_path, tiny_scene, toy_config):
    path = str(tmp_path / 'plain.json')
    model = TrainedModel.initial(tiny_scene, toy_config)
    save_checkpoint(path, model.params)
    with pytest.raises(IoError):
        TrainedModel.load(path)


def test_render_view(tiny_scene, toy_config):
    model = TrainedModel.initial(tiny_scene, toy_config)
    cam = tiny_scene.cameras[0]
    result = render_view(model, cam)
    assert result.image.shape == (16, 16, 3)
    assert result.hit.any() and not result.hit.all()
    assert np.all(result.image[~result.hit] == 0.0)
    assert np.all(np.isinf(result.depth[~result.hit]))
    assert np.all((result.image[result.hit] > 0.0) &
                  (result.image[result.hit] < 1.0))

    threaded = render_view(model, cam, threads=2)
    assert np.array_equal(threaded.image, result.image)


def test_clamped_ray_counts_are_reported_once_per_view(caplog, tiny_scene,
                                                       toy_config):
    config = toy_config.replace(hair_rays=10000)
    recon = Reconstruction(tiny_scene, config)
    values = recon.model.params.values
    for epoch in range(2):
        for view in range(len(tiny_scene.views)):
            inputs = recon.prepare(values, view, epoch)
            hair = tiny_scene.views[view].hair_mask
            assert np.count_nonzero(inputs.batch.hair) == \
                np.count_nonzero(hair)
    clamped = [record.getMessage() for record in caplog.records
               if 'instead of' in record.getMessage()]
    assert len(clamped) == len(tiny_scene.views)
    assert all('instead of 10000' in message for message in clamped)


@pytest.mark.slow
def test_resumed_training_continues_the_history(tmp_path, tiny_scene,
                                                toy_config):
    config = toy_config.replace(checkpoint_every=1)
    outdir = str(tmp_path / 'run')
    path = os.path.join(outdir, 'history.csv')
    train(tiny_scene, config, outdir=outdir)
    with open(path) as fd:
        first = fd.read().splitlines()

    model, adam, extra = TrainedModel.load(
            os.path.join(outdir, 'checkpoint-0001.json'))
    train(tiny_scene, config, model=model, adam=adam, outdir=outdir,
          start_epoch=extra['epoch'])
    with open(path) as fd:
        lines = fd.read().splitlines()
    assert [line.split(',')[0] for line in lines[1:]] == ['0', '1', '2']
    assert lines[:2] == first[:2]
