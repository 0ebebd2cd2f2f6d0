import json

import pytest

from headrecon.config import ABLATIONS, GaborBank, LossWeights, \
    NetworkConfig, StageSchedule, SyntheticConfig, TrainConfig, TracerConfig
from headrecon.exception import HairException, ReconException


def test_default_boundaries_are_thirds():
    schedule = StageSchedule(epochs=300)
    assert schedule.boundaries == (100, 200)
    assert [schedule.stage(e) for e in (0, 99, 100, 199, 200, 299)] == \
        [1, 1, 2, 2, 3, 3]


def test_explicit_boundaries():
    schedule = StageSchedule(epochs=10, first=2, second=8)
    assert [schedule.stage(e) for e in (1, 2, 7, 8)] == [1, 2, 2, 3]
    with pytest.raises(ReconException):
        StageSchedule(epochs=10, first=8, second=2)


def test_active_terms_by_stage():
    config = TrainConfig(schedule=StageSchedule(epochs=9))
    assert config.active_terms(0) == {'rgb', 'mask', 'eikonal', 'proxy'}
    assert config.active_terms(3) == {'rgb', 'mask', 'eikonal', 'proxy',
                                      'semantic'}
    assert config.active_terms(6) == {'rgb', 'mask', 'eikonal', 'proxy',
                                      'semantic', 'orientation'}


def test_prior_order_permutation():
    config = TrainConfig(schedule=StageSchedule(epochs=9),
                         prior_order='orientation,proxy,semantic')
    assert config.prior_stages() == {'orientation': 1, 'proxy': 2,
                                     'semantic': 3}
    assert config.active_terms(0) == {'rgb', 'mask', 'eikonal',
                                      'orientation'}
    assert config.active_terms(3) == {'rgb', 'mask', 'eikonal',
                                      'orientation', 'proxy'}
    early = config.weights_at(0)
    assert (early.rgb, early.eikonal) == (100.0, 10.0)


def test_all_priors_at_once():
    config = TrainConfig(schedule=StageSchedule(epochs=9), prior_order='all')
    assert config.active_terms(0) == {'rgb', 'mask', 'eikonal', 'proxy',
                                      'semantic', 'orientation'}
    assert config.replace(ablation='no-semantic').active_terms(0) == \
        {'rgb', 'mask', 'eikonal', 'proxy', 'orientation'}


@pytest.mark.parametrize('order', ['proxy,semantic', 'proxy,proxy,semantic',
                                   'proxy,semantic,orientation,rgb', ''])
def test_invalid_prior_orders(order):
    with pytest.raises(ReconException):
        TrainConfig(prior_order=order)


@pytest.mark.parametrize('ablation, missing', [
    ('none', set()), ('baseline', {'proxy', 'semantic', 'orientation'}),
    ('no-proxy', {'proxy'}), ('no-semantic', {'semantic'}),
    ('semantic-without-hair', set()), ('no-orientation', {'orientation'})])
def test_ablations(ablation, missing):
    config = TrainConfig(schedule=StageSchedule(epochs=9), ablation=ablation)
    full = {'rgb', 'mask', 'eikonal', 'proxy', 'semantic', 'orientation'}
    assert config.active_terms(8) == full - missing


def test_unknown_ablation():
    assert 'none' in ABLATIONS
    with pytest.raises(ReconException):
        TrainConfig(ablation='no-hair')


def test_orientation_stage_overrides():
    config = TrainConfig(schedule=StageSchedule(epochs=9))
    assert config.weights_at(0) == LossWeights()
    late = config.weights_at(8)
    assert (late.rgb, late.eikonal) == (100.0, 10.0)
    assert late.mask == 100.0

    ablated = config.replace(ablation='no-orientation')
    assert ablated.weights_at(8) == LossWeights()


def test_alpha_doubling():
    config = TrainConfig(schedule=StageSchedule(epochs=9),
                         alpha_doubling=True)
    assert [config.weights_at(e).alpha for e in (0, 3, 6)] == \
        [50.0, 100.0, 200.0]


def test_invalid_values():
    with pytest.raises(ReconException):
        LossWeights(mask=-1.0)
    with pytest.raises(ReconException):
        LossWeights(alpha=0.0)
    with pytest.raises(HairException):
        GaborBank(n_orientations=1)
    with pytest.raises(ReconException):
        SyntheticConfig(views=0)
    with pytest.raises(ReconException):
        TrainConfig(lr=0.0)


def test_network_presets():
    desk = NetworkConfig.desk()
    assert (desk.sdf_width, desk.sdf_depth, desk.sdf_skips) == (32, 4, (2,))
    assert desk.feature_width == 8
    assert (desk.color_width, desk.semantic_width) == (32, 32)
    assert desk.init_radius == NetworkConfig().init_radius
    assert NetworkConfig.full_scale().sdf_width > NetworkConfig().sdf_width


def test_gabor_angles():
    angles = GaborBank(n_orientations=4).angles
    assert angles == pytest.approx((0.0, 0.7853981634, 1.5707963268,
                                    2.3561944902))


def test_dictionary_round_trip():
    config = TrainConfig(network=NetworkConfig.toy(), head_rays=32,
                         tracer=TracerConfig(eps=1e-5),
                         schedule=StageSchedule(epochs=12, first=3))
    copy = TrainConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert copy == config
    assert copy.network.sdf_skips == (1,)


def test_epochs_shorthand_and_unknown_keys(caplog):
    config = TrainConfig.from_dict({'epochs': 30, 'lr': 1e-3,
                                    'colour': 'red'})
    assert config.epochs == 30
    assert config.lr == 1e-3
    assert 'colour' in caplog.text

    nested = TrainConfig.from_dict({'epochs': 30,
                                    'schedule': {'epochs': 60}})
    assert nested.epochs == 60
