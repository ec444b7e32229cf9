use oomdp::io::{parse_map, parse_map_bytes, render_map, RunConfig};
use proptest::prelude::*;

/// Random grid text with exactly one agent and one destination.
fn grid() -> impl Strategy<Value = String> {
    (1usize..12, 1usize..12)
        .prop_flat_map(|(w, h)| {
            let cells = prop::collection::vec(prop::sample::select(vec!['.', '.', '#', 'B']), w * h);
            (Just(w), cells, 0..w * h, 0..w * h)
        })
        .prop_filter("agent and destination apart", |(_, _, a, d)| a != d)
        .prop_map(|(w, mut cells, a, d)| {
            cells[a] = 'A';
            cells[d] = 'D';
            cells.chunks(w).map(|row| row.iter().collect::<String>() + "\n").collect()
        })
}

proptest! {
    #[test]
    fn render_parse_render_is_stable(text in grid()) {
        let map = parse_map(&text).unwrap();
        let once = render_map(&map);
        prop_assert_eq!(&once, &text);
        let again = parse_map(&once).unwrap();
        prop_assert_eq!(&again, &map);
        prop_assert_eq!(render_map(&again), once);
    }

    #[test]
    fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        if let Err(e) = parse_map_bytes(&bytes) {
            prop_assert!(e.line >= 1 && e.column >= 1);
        }
    }

    #[test]
    fn comments_and_padding_do_not_change_the_map(text in grid(), pad in "[ \t]{0,3}") {
        let decorated: String = std::iter::once("% header\n".to_owned())
            .chain(text.lines().map(|l| format!("{l}{pad}\r\n")))
            .collect();
        prop_assert_eq!(parse_map(&decorated).unwrap(), parse_map(&text).unwrap());
    }
}

#[test]
fn config_text_sets_every_key() {
    let values = [
        ("map", "m.map"),
        ("out", "outdir"),
        ("episodes", "7"),
        ("seed", "3"),
        ("gamma", "0.9"),
        ("epsilon", "0.001"),
        ("k", "3"),
        ("rmax", "10"),
        ("horizon", "99"),
        ("reward-step", "-2"),
        ("reward-success", "5"),
        ("reward-illegal", "-4"),
        ("particles-min", "50"),
        ("particles-max", "600"),
        ("beams", "8"),
        ("max-range", "4"),
        ("trans-sd", "0.05"),
        ("rot-sd", "0.01"),
        ("range-sd", "0.1"),
        ("model-range-sd", "0.4"),
        ("z-hit", "0.8"),
        ("kld-epsilon", "0.1"),
        ("kld-delta", "0.05"),
        ("steps", "12"),
    ];
    assert_eq!(values.len(), RunConfig::KEYS.len());
    let text: String = values.iter().map(|(k, v)| format!("{k} = {v}  # note\n")).collect();
    let mut cfg = RunConfig::default();
    cfg.apply_text(&text).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.episodes, 7);
    assert_eq!(cfg.reward_step, -2.0);
    assert_eq!(cfg.model_range_sd, 0.4);
    assert_eq!(cfg.sensor_noise().range_sd, 0.4);
    assert!((cfg.sensor_noise().z_rand - 0.2).abs() < 1e-12);
    assert_eq!(cfg.kld().max_particles, 600);
    assert_eq!(cfg.map.as_deref(), Some(std::path::Path::new("m.map")));
    for key in RunConfig::KEYS {
        let mut fresh = RunConfig::default();
        let value = values.iter().find(|(k, _)| *k == key).unwrap().1;
        assert!(fresh.set(key, value).unwrap(), "{key}");
        assert_ne!(fresh, RunConfig::default(), "{key} had no effect");
    }
}

#[test]
fn config_errors_name_the_problem() {
    let mut cfg = RunConfig::default();
    assert!(cfg.apply_text("gamma 0.9\n").is_err());
    assert!(cfg.apply_text("colour = red\n").unwrap_err().to_string().contains("colour"));
    assert!(cfg.apply_text("episodes = many\n").unwrap_err().to_string().contains("many"));
    cfg.apply_text("gamma = 1.0\n").unwrap();
    assert!(cfg.validate().unwrap_err().to_string().contains("gamma"));
}
