public class ParseCount {
    public static void main(String[] args) {
        String text = args[0];
        int value = Integer.parseInt(text);
        System.out.println("count: " + value);
    }
}
