import math

import numpy as np
import pytest

from constants import Band
from errors import ConfigError, DomainError
from spatial.floorplan import ApSite, Floorplan, Wall, load_sites
from spatial.propagation import (
    FloorplanRadio,
    StaticRadioMap,
    heatmap,
    load_path_loss,
    received_power,
    signatures,
)

B5 = Band.B5G
TX = 20.0


@pytest.fixture(scope="module")
def model():
    return load_path_loss()


def _site(name: str = "ap", position=(10.0, 10.0)) -> ApSite:
    return ApSite(name=name, position=position, tx_power={band: TX for band in Band})


def _expected(model, band: Band, distance: float, walls: float = 0.0) -> float:
    params = model.band(band)
    return TX - params.ref_loss - 10 * params.exponent * math.log10(max(distance, model.d0) / model.d0) - walls


def test_received_power_at_reference_distance(model) -> None:
    """Test that a point at d0 without walls receives tx_power - PL(d0)."""
    room = Floorplan(width=20.0, height=20.0)
    assert received_power(_site(), B5, (11.0, 10.0), room, model) == pytest.approx(TX - 46.4)


def test_received_power_clamps_zero_distance(model) -> None:
    """Test that the AP's own position is treated as d0."""
    room = Floorplan(width=20.0, height=20.0)
    assert received_power(_site(), B5, (10.0, 10.0), room, model) == pytest.approx(TX - 46.4)


def test_one_wall_costs_exactly_its_attenuation(model) -> None:
    """Test that a 5 dB wall makes a 5 dB difference against a free path of equal length."""
    wall = Wall(start=(15.0, 0.0), end=(15.0, 20.0), attenuation={B5: 5.0})
    room = Floorplan(width=20.0, height=20.0, walls=(wall,))
    behind = received_power(_site(), B5, (18.0, 10.0), room, model)
    free = received_power(_site(), B5, (2.0, 10.0), room, model)
    assert free - behind == pytest.approx(5.0)


def test_diagonal_through_three_walls(model) -> None:
    """Test a diagonal crossing three partitions against the hand-counted intersections."""
    walls = tuple(Wall(start=(x, 0.0), end=(x, 10.0), attenuation={B5: 5.0}) for x in (2.0, 4.0, 6.0))
    room = Floorplan(width=10.0, height=10.0, walls=walls)
    site = _site(position=(1.0, 1.0))
    distance = math.hypot(6.0, 8.0)
    assert received_power(site, B5, (7.0, 9.0), room, model) == pytest.approx(_expected(model, B5, distance, 15.0))


def test_touching_a_wall_end_is_not_a_crossing(model) -> None:
    """Test that a path through a wall end point does not pay the wall loss."""
    wall = Wall(start=(2.0, 0.0), end=(2.0, 5.0), attenuation={B5: 5.0})
    room = Floorplan(width=10.0, height=10.0, walls=(wall,))
    site = _site(position=(0.0, 0.0))
    assert received_power(site, B5, (4.0, 10.0), room, model) == pytest.approx(
        _expected(model, B5, math.hypot(4.0, 10.0))
    )


def test_received_power_domain_errors(model) -> None:
    """Test the errors for points outside the plan and bands the AP does not transmit on."""
    room = Floorplan(width=20.0, height=20.0)
    with pytest.raises(DomainError):
        received_power(_site(), B5, (25.0, 1.0), room, model)
    single = ApSite(name="ap", position=(1.0, 1.0), tx_power={Band.B2G4: TX}, bands=(Band.B2G4,))
    with pytest.raises(DomainError):
        received_power(single, B5, (2.0, 2.0), room, model)


def test_floorplan_validation() -> None:
    """Test that negative attenuation, walls outside the extent and APs outside the plan are rejected."""
    with pytest.raises(ConfigError):
        Wall(start=(0.0, 0.0), end=(1.0, 0.0), attenuation={B5: -1.0})
    with pytest.raises(ConfigError):
        Floorplan(width=5.0, height=5.0, walls=(Wall(start=(0.0, 0.0), end=(6.0, 0.0)),))
    with pytest.raises(ConfigError):
        load_sites([{"name": "ap", "position": [6, 1], "tx_power_dbm": 20}], Floorplan(width=5.0, height=5.0))


def test_heatmap_matches_pointwise_calls(model) -> None:
    """Test that 1 m cells on a 20 x 20 m plan give 400 values equal to received_power per cell."""
    room = Floorplan(width=20.0, height=20.0)
    grid = heatmap(_site(position=(10.5, 10.5)), B5, 1.0, room, model)
    frame = grid.to_frame()
    assert len(frame) == 400
    sample = frame.sample(n=25, random_state=1)
    for row in sample.itertuples(index=False):
        assert row.rx_dbm == pytest.approx(received_power(_site(position=(10.5, 10.5)), B5, (row.x, row.y), room, model))


def test_heatmap_decreases_with_distance_in_empty_room(model) -> None:
    """Test radial monotonicity and the maximum at the AP cell."""
    room = Floorplan(width=20.0, height=20.0)
    grid = heatmap(_site(position=(10.5, 10.5)), B5, 1.0, room, model)
    frame = grid.to_frame()
    distance = np.hypot(frame["x"] - 10.5, frame["y"] - 10.5).to_numpy()
    ordered = frame["rx_dbm"].to_numpy()[np.argsort(distance, kind="stable")]
    assert np.all(np.diff(ordered) <= 1e-9)
    assert grid.argmax() == (10.5, 10.5)


def test_household_heatmaps_peak_at_their_ap(tc1_config, model) -> None:
    """Test that every household AP's 2.4 GHz heatmap peaks within one cell of the AP."""
    plan = Floorplan.from_dict(tc1_config["floorplan"])
    sites = load_sites(tc1_config["aps"], plan)
    assert len(sites) == 4
    for site in sites:
        peak = heatmap(site, Band.B2G4, 1.0, plan, model).argmax()
        assert math.dist(peak, site.position) <= 1.0


def test_signature_dimensions(tc1_config, model) -> None:
    """Test 12 entries for 4 APs x 3 bands and a single entry for one AP on one band."""
    plan = Floorplan.from_dict(tc1_config["floorplan"])
    sites = load_sites(tc1_config["aps"], plan)
    points = np.array([[3.0, 3.0], [12.0, 8.0]])
    full = signatures(sites, list(Band), points, plan, model)
    assert full.dimension == 12
    assert full.labels[0] == f"{sites[0].name}@2.4"
    assert np.isfinite(full.vectors).all()
    single = signatures(sites[:1], [B5], points, plan, model)
    assert single.dimension == 1
    assert single.vectors.shape == (2, 1)


def test_coincident_points_share_a_signature(tc1_config, model) -> None:
    """Test determinism of signatures for two identical points."""
    plan = Floorplan.from_dict(tc1_config["floorplan"])
    sites = load_sites(tc1_config["aps"], plan)
    sig = signatures(sites, list(Band), np.array([[8.0, 9.0], [8.0, 9.0]]), plan, model)
    np.testing.assert_array_equal(sig[0], sig[1])


def test_floorplan_radio_matrix_matches_single_calls(tc1_config, model) -> None:
    """Test the vectorised (stations, ap_bands) matrix against per-pair calls."""
    plan = Floorplan.from_dict(tc1_config["floorplan"])
    sites = load_sites(tc1_config["aps"], plan)
    radio = FloorplanRadio(plan, model)
    pairs = [(site, band) for site in sites for band in (Band.B2G4, B5)]
    positions = np.array([[3.0, 10.0], [17.0, 8.5]])
    matrix = radio.rx_matrix(["a", "b"], positions, pairs)
    assert matrix.shape == (2, len(pairs))
    for col, (site, band) in enumerate(pairs):
        assert matrix[1, col] == pytest.approx(radio.rx_power("b", (17.0, 8.5), site, band))


def test_static_radio_map_missing_links_are_unreachable() -> None:
    """Test that a fixed RCPI table reports -inf for pairs it does not list."""
    ap = _site("ap0", (0.0, 0.0))
    radio = StaticRadioMap({("sta1", "ap0", B5): -55.0})
    assert radio.rx_power("sta1", (0.0, 0.0), ap, B5) == -55.0
    assert radio.rx_power("sta2", (0.0, 0.0), ap, B5) == -np.inf
    assert radio.ap_link_power(ap, _site("ap1"), B5) == -np.inf
