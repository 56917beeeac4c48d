//! Fault-schedule DSL: `none`, or a comma-separated list of
//! `kill:<layer>:<neuron>@<time>` / `kill:coord:<index>@<time>` with times in
//! milliseconds (`t500`, `500ms`, or plain `500`).

use anyhow::{bail, Context};
use neuromesh::runtime::{Addr, FaultEvent};

pub fn parse_target(text: &str) -> anyhow::Result<Addr> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["coord", idx] => Ok(Addr::Coordinator(
            idx.parse().with_context(|| format!("bad coordinator index {idx:?}"))?,
        )),
        [layer, neuron] => Ok(Addr::node(
            layer.parse().with_context(|| format!("bad layer {layer:?}"))?,
            neuron.parse().with_context(|| format!("bad neuron {neuron:?}"))?,
        )),
        _ => bail!("bad target {text:?}; expected layer:neuron or coord:index"),
    }
}

fn parse_time_ms(text: &str) -> anyhow::Result<u64> {
    let trimmed = text
        .strip_prefix('t')
        .unwrap_or(text)
        .strip_suffix("ms")
        .unwrap_or_else(|| text.strip_prefix('t').unwrap_or(text));
    trimmed
        .parse::<u64>()
        .with_context(|| format!("bad time {text:?}; expected milliseconds like t500"))
}

pub fn parse_schedule(text: &str) -> anyhow::Result<Vec<FaultEvent>> {
    let text = text.trim();
    if text.is_empty() || text == "none" {
        return Ok(Vec::new());
    }
    let mut events = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        let Some(rest) = item.strip_prefix("kill:") else {
            bail!("bad fault {item:?}; expected kill:<target>@<time>");
        };
        let Some((target, time)) = rest.rsplit_once('@') else {
            bail!("bad fault {item:?}; missing @time");
        };
        events.push(FaultEvent {
            at_us: parse_time_ms(time)? * 1000,
            target: parse_target(target)?,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn none_is_empty() {
        assert!(parse_schedule("none").unwrap().is_empty());
        assert!(parse_schedule("").unwrap().is_empty());
    }

    #[test]
    fn kill_list_parses() {
        let events = parse_schedule("kill:1:3@t0,kill:coord:0@800,kill:2:7@250ms").unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(events[0].target, Addr::node(1, 3));
        assert_eq!(events[0].at_us, 0);
        assert_eq!(events[1].target, Addr::Coordinator(0));
        assert_eq!(events[1].at_us, 800_000);
        assert_eq!(events[2].at_us, 250_000);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(parse_schedule("explode:1:1@t0").is_err());
        assert!(parse_schedule("kill:1:1").is_err());
        assert!(parse_schedule("kill:one:two@t5").is_err());
    }
}
