//! Agent protocol: the JSON action message, its parser, the fixed feedback
//! templates and the system / step prompts sent to every player.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interactions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub use_item_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
}

impl Interactions {
    /// `use_item_id` trimmed, `None` when blank.
    pub fn item(&self) -> Option<&str> {
        self.use_item_id.as_deref().map(str::trim).filter(|s| !s.is_empty())
    }

    /// `input` trimmed, `None` when blank.
    pub fn text(&self) -> Option<&str> {
        self.input.as_deref().map(str::trim).filter(|s| !s.is_empty())
    }
}

/// One action message. Every field is optional; absent means "not performed".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentAction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub move_forward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotate_right: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotate_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub look_at: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grab: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interactions: Option<Interactions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl AgentAction {
    pub fn grabs(&self) -> bool {
        self.grab == Some(true)
    }

    /// Compact JSON text accepted by [`parse_action`].
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("action serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("the action is not a valid JSON object: {0}")]
    Malformed(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("`{field}` must be {expected}")]
    WrongType { field: String, expected: &'static str },
    #[error("`{field}` must be within [{min}, {max}], got {value}")]
    OutOfRange { field: String, value: f64, min: f64, max: f64 },
}

const FIELDS: [&str; 9] = [
    "move_forward",
    "rotate_right",
    "rotate_down",
    "jump",
    "look_at",
    "grab",
    "interactions",
    "read",
    "rationale",
];

/// Removes a surrounding markdown code fence, if the whole message is one.
fn strip_fence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return t;
    };
    match body.find('\n') {
        Some(nl) => body[nl + 1..].trim(),
        None => body.trim(),
    }
}

fn number(obj: &Map<String, Value>, field: &str, min: f64, max: f64) -> Result<Option<f64>, ParseError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => {
            let value = n.as_f64().ok_or_else(|| ParseError::WrongType {
                field: field.into(),
                expected: "a number",
            })?;
            if !(min..=max).contains(&value) {
                return Err(ParseError::OutOfRange {
                    field: field.into(),
                    value,
                    min,
                    max,
                });
            }
            Ok(Some(value))
        }
        Some(_) => Err(ParseError::WrongType {
            field: field.into(),
            expected: "a number",
        }),
    }
}

fn boolean(obj: &Map<String, Value>, field: &str) -> Result<Option<bool>, ParseError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Bool(b)) => Ok(Some(*b)),
        Some(_) => Err(ParseError::WrongType {
            field: field.into(),
            expected: "true or false",
        }),
    }
}

fn string(obj: &Map<String, Value>, field: &str, name: &str) -> Result<Option<String>, ParseError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(ParseError::WrongType {
            field: name.into(),
            expected: "a string",
        }),
    }
}

/// Parses one action message. Unknown keys, wrong types and out-of-range
/// numbers are errors; `null` is treated like an absent key.
pub fn parse_action(raw: &str) -> Result<AgentAction, ParseError> {
    let value: Value = serde_json::from_str(strip_fence(raw)).map_err(|e| ParseError::Malformed(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(ParseError::Malformed("expected an object".into()));
    };
    if let Some(k) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(ParseError::UnknownField(k.clone()));
    }
    let look_at = match obj.get("look_at") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) if items.len() == 2 => {
            let mut uv = [0.0; 2];
            for (slot, (item, name)) in uv.iter_mut().zip(items.iter().zip(["look_at[0]", "look_at[1]"])) {
                let v = item.as_f64().ok_or_else(|| ParseError::WrongType {
                    field: name.into(),
                    expected: "a number",
                })?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(ParseError::OutOfRange {
                        field: name.into(),
                        value: v,
                        min: 0.0,
                        max: 1.0,
                    });
                }
                *slot = v;
            }
            Some(uv)
        }
        Some(_) => {
            return Err(ParseError::WrongType {
                field: "look_at".into(),
                expected: "a list of two numbers",
            })
        }
    };
    let interactions = match obj.get("interactions") {
        None | Some(Value::Null) => None,
        Some(Value::Object(inner)) => {
            if let Some(k) = inner.keys().find(|k| *k != "use_item_id" && *k != "input") {
                return Err(ParseError::UnknownField(format!("interactions.{k}")));
            }
            Some(Interactions {
                use_item_id: string(inner, "use_item_id", "interactions.use_item_id")?,
                input: string(inner, "input", "interactions.input")?,
            })
        }
        Some(_) => {
            return Err(ParseError::WrongType {
                field: "interactions".into(),
                expected: "an object",
            })
        }
    };
    Ok(AgentAction {
        move_forward: number(&obj, "move_forward", -10.0, 10.0)?,
        rotate_right: number(&obj, "rotate_right", -180.0, 180.0)?,
        rotate_down: number(&obj, "rotate_down", -90.0, 90.0)?,
        jump: boolean(&obj, "jump")?,
        look_at,
        grab: boolean(&obj, "grab")?,
        interactions,
        read: string(&obj, "read", "read")?,
        rationale: string(&obj, "rationale", "rationale")?,
    })
}

/// Feedback templates. Slots are written `{name}`.
pub mod feedback {
    pub const NO_INTERACTION: &str = "You did not interact with any objects in the last step.";
    pub const ESCAPED: &str = "Escaped successfully!";
    pub const PASSWORD_OK: &str = "You used the correct password to unlock the {target}.";
    pub const PASSWORD_WRONG: &str = "The password you entered is incorrect. The {target} is still locked.";
    pub const KEY_OK: &str = "You used {item} to unlock the {target}.";
    pub const KEY_WRONG: &str = "{item} cannot unlock the {target}.";
    pub const LOCKED: &str = "The {target} is locked. It requires a {requirement} to unlock.";
    pub const DOOR_LOCKED: &str = "The door is locked.";
    pub const NOT_IN_BAG: &str = "{item} is not in your bag.";
    pub const PICKED_UP: &str = "You picked up {item}.";
    pub const OPENED: &str = "You opened the {target} and found {items}.";
    pub const ALREADY_OPEN: &str = "The {target} is already open and there is nothing else inside.";
    pub const ROOM_CHANGE: &str = "You opened the door and entered the next room.";
    pub const READ: &str = "You read {item}: {text}";
    pub const READ_BLANK: &str = "{item} is {description}. There is nothing written on it.";
    pub const PARTIAL_MOVE: &str = "You moved {moved} of {requested} meters before being blocked.";
    pub const INVALID_ACTION: &str = "Invalid action: {error}";
    pub const EMPTY_BAG: &str = "None";

    /// Substitutes `{name}` slots. Unknown slots are left untouched.
    pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
        let mut out = template.to_string();
        for (name, value) in slots {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out
    }
}

pub const SYSTEM_PROMPT: &str = r#"You find yourself locked inside a room, and your ultimate goal is to escape the room. i.e. the room escape game.

You can explore the room, interact with objects, inspect items, and resolve puzzles. If you find doors locked or uninteractable, you probably need to search for keys or passwords to unlock the door when interacting with the environment. You can adopt the following actions to explore the room and interact with objects:
- move_forward: float, ranged between [-10, 10]. This is the number of meters you want to move forward (negative value means moving backward).
- rotate_right: float, ranged between [-180, 180]. This is the number of degrees you want to turn right (negative value means turn left).
- rotate_down: float, ranged between [-90, 90]. This is the angle you want to adjust your view vertically. Positive value means looking downward, while a negative value means looking upward. Angle 0 means looking straight ahead.
- jump: bool, whether you want to jump (can be used together with moving forward), e.g., True represents the action "to jump".
- look_at: list[x: foat, y: float], the range of x and y is [0, 1]. This parameter is the coordinates of the point in the image you want to look at. For reference, the coordinates of the upper left corner of the scene are (0, 0) and the coordinates of the lower right corner are (1, 1). Also to mention that there are on clues on the ceiling.
- grab: bool, whether you require to interact with the object located exactly at the center of the scene (marked by a red dot). e.g., to grab the key or to interact with (or open) a box at the center of the scene, set grab=True. The red dot assists in locating the object you require to interact with. You might need to adjust the view or move closer to ensure the red dot is on your target object, through the rotate_right, rotate_down, and move_forward actions. To successfully grab an object, you should center the object via the red dot and be in a certain distance to it. If the grabbing fails, try move closer towards the object. If it fails multiple times at the same position, you should be aware that not all objects are interactable, do not get stucked in uninteractable position.
- interactions : dict:{"use_item_id": str, this is the item_id you require to view or use (when used together with grab=True, it means to use this item to interact with the target object you want to grab, e.g. using item_id of the key to open the door in the scene), "input": str, this is the message you want to input when interacting with the center object}.
- read: str, this is the item_id that you want to get detailed information from your bag.
- rationale: str, represents the rationale of your action. This should explain your decision-making process and help the agent understand your thinking process.

You need to return data in the following format of JSON_string to interact with the scene:
"#;

pub const ACTION_FORMAT: &str = r#"{
    "move_forward": float,
    "rotate_right": float,
    "rotate_down": float,
    "jump": bool,
    "look_at": [x: float, y: float],
    "grab": bool,
    "interactions": {
        "use_item_id": str,
        "input": str
    },
    "read": str,
    "rationale": str
}"#;

const SYSTEM_TAIL: &str = "All of the above operations are optional. If no value is passed in, the interactive operation will not be performed.

You must follow the above instructions and don't say anything else except for the JSON_string of operations.";

/// The full system prompt, sent once at the start of an episode.
pub fn system_prompt() -> String {
    format!("{SYSTEM_PROMPT}{ACTION_FORMAT}\n\n{SYSTEM_TAIL}")
}

/// The per-step prompt: last interaction result, bag contents, reminder.
pub fn step_prompt(interaction_result: &str, bag_desc: &str) -> String {
    format!(
        "{interaction_result}\n===\nThe items in your bag usable include:\n{bag_desc}\n===\n\
         Please determine the next action(s) that could help you observe the room or obtain useful tools or clues.\n\
         If you find yourself stuck in a corner, try turn around by passing rotate_right.\n\
         You need to return data in the following format of JSON_string to interact with the scene and don't say anything else:\n\
         {ACTION_FORMAT}"
    )
}
