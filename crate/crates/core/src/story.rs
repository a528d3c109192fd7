//! Background stories. Each scene picks one; notes carry excerpts of it.

use crate::catalog::Style;

pub struct StoryTemplate {
    pub title: &'static str,
    pub styles: &'static [Style],
    pub sentences: &'static [&'static str],
}

impl StoryTemplate {
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }

    /// Contiguous run of sentences, joined exactly as in `text`.
    pub fn excerpt(&self, range: std::ops::Range<usize>) -> String {
        self.sentences[range].join(" ")
    }
}

pub static STORIES: &[StoryTemplate] = &[
    StoryTemplate {
        title: "The Clockmaker's Parlour",
        styles: &[Style::LivingRoom],
        sentences: &[
            "An old clockmaker lived in this house and filled every wall with ticking machines.",
            "When his apprentice vanished, the clockmaker stopped every clock at the hour she left.",
            "He locked the parlour and swore no one would leave until someone found out where she had gone.",
            "The apprentice had hidden her travel diary in the room, proving she left of her own will to open her own workshop.",
        ],
    },
    StoryTemplate {
        title: "The Lighthouse Letters",
        styles: &[Style::LivingRoom, Style::Bedroom],
        sentences: &[
            "A retired lighthouse keeper spent his last winter writing letters he never sent.",
            "Each letter was addressed to a sailor he failed to warn during a storm thirty years ago.",
            "His granddaughter sealed the room so the letters would be read by someone before they were burned.",
            "The final letter forgives the keeper himself, signed by the sailor who survived.",
        ],
    },
    StoryTemplate {
        title: "The Midnight Bakery",
        styles: &[Style::Kitchen],
        sentences: &[
            "A baker in a small town only opened her kitchen between midnight and dawn.",
            "Her bread was said to let people remember one forgotten day of their lives.",
            "A rival bought the shop and locked the kitchen to steal the recipe.",
            "The recipe turned out to be nothing but patience and a note telling the reader to share the first loaf.",
        ],
    },
    StoryTemplate {
        title: "The Chef's Last Menu",
        styles: &[Style::Kitchen, Style::LivingRoom],
        sentences: &[
            "A famous chef closed his restaurant the night before a critic was due to visit.",
            "He wrote a final menu listing dishes from every city he had cooked in.",
            "Guests who want to leave must retrace the menu and find what he hid between the courses.",
            "The hidden course is a letter to his daughter inviting her to take over the restaurant.",
        ],
    },
    StoryTemplate {
        title: "The Flooded Spa",
        styles: &[Style::Bathroom],
        sentences: &[
            "A grand spa hotel was abandoned after its hot spring suddenly ran cold.",
            "The owner believed a guest had cursed the water and locked the bathhouse.",
            "Engineers later found the spring had been diverted by a neighbour building his own baths.",
            "The owner's notes reveal he knew the truth and kept the bathhouse closed out of shame.",
        ],
    },
    StoryTemplate {
        title: "The Perfumer's Secret",
        styles: &[Style::Bathroom, Style::Bedroom],
        sentences: &[
            "A perfumer mixed a scent that made people recall their happiest morning.",
            "She hid the formula in her private washroom before moving abroad.",
            "Her former partner left clues for whoever could prove they deserved it.",
            "The formula is written as a list of places she loved, not of ingredients.",
        ],
    },
    StoryTemplate {
        title: "The Sleepwalker's Map",
        styles: &[Style::Bedroom],
        sentences: &[
            "A cartographer began drawing maps in his sleep of a city no one could find.",
            "His family locked his bedroom at night to keep him from wandering outside.",
            "One morning the maps were gone and the window was latched from the inside.",
            "The last map shows this very house, with a route marked out through its only door.",
        ],
    },
    StoryTemplate {
        title: "The Music Box Heir",
        styles: &[Style::Bedroom, Style::LivingRoom],
        sentences: &[
            "A wealthy collector left her fortune to whoever could play her music box backwards.",
            "Her nephews searched the house for years and found only broken toys.",
            "The real music box was kept by her housekeeper, who had been her closest friend.",
            "The will names the housekeeper as heir, hidden where only a patient guest would look.",
        ],
    },
];

/// Stories carrying `style`.
pub fn stories_for(style: Style) -> Vec<&'static StoryTemplate> {
    STORIES.iter().filter(|s| s.styles.contains(&style)).collect()
}
