public class ParseCount {
    public static void main(String[] args) {
        String text = args[0];
        try {
            int value = Integer.parseInt(text);
        } catch (NumberFormatException ex) {
            System.err.println("Bad numeric input: " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("count: " + value);
    }
}
